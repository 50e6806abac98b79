#pragma once

// Market configuration files (JSON):
//
//   {
//     "agents": 5, "objects": 10,
//     "edge_prob": 0.3,                  // or a q x d matrix
//     "weight_rule": "insurance",        // or {"type": "investment", "capitals": [...]}
//                                        // or {"type": "explicit", "weights": [[...]]}
//     "alpha": 2.0,
//     "k_coeffs": 1.0,                   // or a length-d array
//     "regime": "independent"            // or "dependent"
//   }

#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tailnet/error.hpp"
#include "tailnet/market.hpp"

namespace tailnet {

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("missing key '") + key + "'");
    return j.at(key);
}

inline double as_number(const nlohmann::json& j, const std::string& what) {
    if (!j.is_number()) throw ConfigError(what + " must be a number");
    return j.get<double>();
}

inline std::size_t as_count(const nlohmann::json& j, const std::string& what) {
    if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(what + " must be an integer");
    const auto v = j.get<long long>();
    if (v <= 0) throw ConfigError(what + " must be positive");
    return static_cast<std::size_t>(v);
}

inline Matrix as_matrix(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& what) {
    if (j.is_number()) return Matrix(rows, cols, j.get<double>());
    if (!j.is_array() || j.size() != rows) throw ConfigError(what + " must be a scalar or a " + std::to_string(rows) +
                                                             "x" + std::to_string(cols) + " matrix");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != cols)
            throw ConfigError(what + " row " + std::to_string(i + 1) + " must have " + std::to_string(cols) +
                              " entries");
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = as_number(row[c], what);
    }
    return m;
}

inline std::vector<double> as_vector(const nlohmann::json& j, std::size_t n, const std::string& what) {
    if (j.is_number()) return std::vector<double>(n, j.get<double>());
    if (!j.is_array() || j.size() != n)
        throw ConfigError(what + " must be a scalar or an array of length " + std::to_string(n));
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = as_number(j[k], what);
    return v;
}

}  // namespace detail

inline MarketSpec parse_market(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    static const std::set<std::string> known{"agents", "objects", "edge_prob", "weight_rule", "alpha", "k_coeffs",
                                             "regime"};
    for (const auto& item : j.items())
        if (!known.count(item.key())) throw ConfigError("unknown configuration key '" + item.key() + "'");

    MarketSpec spec;
    spec.q = detail::as_count(detail::require_key(j, "agents"), "agents");
    spec.d = detail::as_count(detail::require_key(j, "objects"), "objects");
    spec.edge_probs = detail::as_matrix(detail::require_key(j, "edge_prob"), spec.q, spec.d, "edge_prob");
    spec.alpha = detail::as_number(detail::require_key(j, "alpha"), "alpha");
    spec.k_coeffs = j.contains("k_coeffs") ? detail::as_vector(j.at("k_coeffs"), spec.d, "k_coeffs")
                                           : std::vector<double>(spec.d, 1.0);

    if (j.contains("weight_rule")) {
        const auto& w = j.at("weight_rule");
        const std::string type = w.is_string() ? w.get<std::string>()
                                 : w.is_object() && w.contains("type") && w.at("type").is_string()
                                     ? w.at("type").get<std::string>()
                                     : std::string{};
        if (type == "insurance") {
            spec.weight_rule = InsuranceEqualSplit{};
        } else if (type == "investment") {
            if (!w.is_object()) throw ConfigError("investment weight rule needs 'capitals'");
            spec.weight_rule =
                InvestmentEqualSplit{detail::as_vector(detail::require_key(w, "capitals"), spec.q, "capitals")};
        } else if (type == "explicit") {
            if (!w.is_object()) throw ConfigError("explicit weight rule needs 'weights'");
            spec.weight_rule =
                ExplicitConstant{detail::as_matrix(detail::require_key(w, "weights"), spec.q, spec.d, "weights")};
        } else {
            throw ConfigError("weight_rule must be 'insurance', 'investment' or 'explicit'");
        }
    }

    if (j.contains("regime")) {
        const auto& r = j.at("regime");
        const std::string s = r.is_string() ? r.get<std::string>() : std::string{};
        if (s == "independent")
            spec.regime = Regime::AsymptoticallyIndependent;
        else if (s == "dependent")
            spec.regime = Regime::AsymptoticallyFullyDependent;
        else
            throw ConfigError("regime must be 'independent' or 'dependent'");
    }
    require_valid(spec);
    return spec;
}

inline MarketSpec parse_market(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("malformed configuration: ") + e.what());
    }
    return parse_market(j);
}

inline MarketSpec load_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_market(ss.str());
}

}  // namespace tailnet
