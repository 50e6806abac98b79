#pragma once

// Minimal CSV emitter: header row, comma separator, '.' decimals, quoting
// only where a field needs it. Doubles use the shortest round-trip form.

#include <charconv>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace tailnet {

inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return {buf, res.ptr};
}

inline std::string format_double(const std::optional<double>& x) { return x ? format_double(*x) : std::string{}; }

inline std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out;
    out.reserve(field.size() + 2);
    out.push_back('"');
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void row(const std::vector<std::string>& fields) {
        for (std::size_t k = 0; k < fields.size(); ++k) {
            if (k) os_ << ',';
            os_ << csv_escape(fields[k]);
        }
        os_ << '\n';
    }

    void row(std::initializer_list<std::string> fields) { row(std::vector<std::string>(fields)); }

private:
    std::ostream& os_;
};

}  // namespace tailnet
