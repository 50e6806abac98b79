#pragma once

// Claims that no agent covers: P(sum_j 1(deg(j)=0) V_j > t) ~ t^-alpha sum_l K_l P(deg(l)=0).

#include <cmath>
#include <vector>

#include "tailnet/error.hpp"
#include "tailnet/market.hpp"

namespace tailnet {

struct UncoveredResult {
    std::vector<double> p_zero;  // P(deg(j) = 0)
    double constant = 0.0;       // sum_l K_l P(deg(l) = 0)
    double expected_count = 0.0; // E N, N = number of uncovered objects
};

inline UncoveredResult uncovered(const MarketSpec& spec) {
    require_valid(spec);
    UncoveredResult out;
    out.p_zero.resize(spec.d);
    long double c = 0.0L, n = 0.0L;
    for (std::size_t j = 0; j < spec.d; ++j) {
        long double pz = 1.0L;
        for (std::size_t i = 0; i < spec.q; ++i) pz *= 1.0L - spec.edge_probs(i, j);
        out.p_zero[j] = static_cast<double>(pz);
        c += static_cast<long double>(spec.k_coeffs[j]) * pz;
        n += pz;
    }
    out.constant = static_cast<double>(c);
    out.expected_count = static_cast<double>(n);
    return out;
}

/// constant * t^-alpha.
inline double uncovered_tail(const MarketSpec& spec, double t) {
    if (!(t > 0.0)) throw DomainError("t must be positive");
    return uncovered(spec).constant * std::pow(t, -spec.alpha);
}

}  // namespace tailnet
