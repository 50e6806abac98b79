#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <variant>

#include "tailnet/error.hpp"

namespace tailnet {

/// Exponent of the r-(quasi-)norm used to aggregate exposures. r >= 1 gives a
/// norm, 0 < r < 1 a quasi-norm; the max-norm is held as a separate state
/// rather than a large finite r.
class NormSpec {
public:
    explicit NormSpec(double r) : r_(r) {
        if (!(r > 0.0)) throw ConfigError("norm exponent r must be positive");
        if (std::isinf(r)) max_ = true;
    }

    static NormSpec max_norm() { return NormSpec(std::numeric_limits<double>::infinity()); }

    bool is_max() const noexcept { return max_; }
    double r() const noexcept { return r_; }

    /// Exponent e with ||(1/n, ..., 1/n)||_r = n^e for a vector of n equal
    /// shares: 1/r - 1, and -1 for the max-norm.
    double share_exponent() const noexcept { return max_ ? -1.0 : 1.0 / r_ - 1.0; }

    double operator()(std::span<const double> x) const {
        if (max_) {
            double m = 0.0;
            for (double v : x) m = std::max(m, std::abs(v));
            return m;
        }
        if (r_ == 1.0) {
            double s = 0.0;
            for (double v : x) s += std::abs(v);
            return s;
        }
        double s = 0.0;
        for (double v : x)
            if (v != 0.0) s += std::pow(std::abs(v), r_);
        return s == 0.0 ? 0.0 : std::pow(s, 1.0 / r_);
    }

    std::string label() const {
        if (max_) return "inf";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%g", r_);
        return buf;
    }

    friend bool operator==(const NormSpec& a, const NormSpec& b) {
        return a.max_ == b.max_ && (a.max_ || a.r_ == b.r_);
    }

private:
    double r_;
    bool max_ = false;
};

inline NormSpec parse_norm(const std::string& text) {
    if (text == "inf" || text == "max" || text == "Inf" || text == "infinity") return NormSpec::max_norm();
    std::size_t used = 0;
    double r = 0.0;
    try {
        r = std::stod(text, &used);
    } catch (const std::exception&) {
        throw ConfigError("cannot parse norm exponent '" + text + "'");
    }
    if (used != text.size()) throw ConfigError("cannot parse norm exponent '" + text + "'");
    return NormSpec(r);
}

/// Coordinate projection x -> x_i (zero-based agent index).
struct Projection {
    std::size_t agent;
};

/// Aggregation x -> ||x||_r.
struct NormAggregation {
    NormSpec norm;
};

/// A continuous 1-homogeneous aggregation of the exposure vector: either one
/// agent's exposure or a (quasi-)norm of the whole vector.
using Aggregation = std::variant<Projection, NormAggregation>;

inline double evaluate(const Aggregation& g, std::span<const double> x) {
    if (const auto* p = std::get_if<Projection>(&g)) return x[p->agent];
    return std::get<NormAggregation>(g).norm(x);
}

inline bool is_projection(const Aggregation& g) { return std::holds_alternative<Projection>(g); }

inline std::string label(const Aggregation& g) {
    if (const auto* p = std::get_if<Projection>(&g)) return "F" + std::to_string(p->agent + 1);
    return "S(r=" + std::get<NormAggregation>(g).norm.label() + ")";
}

/// x^a with the conventions 0^a = 0 for a > 0 and 0^0 = 1.
inline double pow0(double x, double a) {
    if (x == 0.0) return a == 0.0 ? 1.0 : 0.0;
    return std::pow(x, a);
}

}  // namespace tailnet
