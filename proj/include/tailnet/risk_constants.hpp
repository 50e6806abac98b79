#pragma once

// Regular-variation constants of the exposure vector F = AV:
//
//   C_ind^h = sum_j K_j E h(A e_j)^alpha        (asymptotically independent claims)
//   C_dep^h = E h(A K^{1/alpha} 1)^alpha         (asymptotically fully dependent claims)
//
// with h a projection (one agent) or an r-norm (the system), and the
// marginal VaR / CoTE asymptotics they determine.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tailnet/error.hpp"
#include "tailnet/expectation.hpp"
#include "tailnet/market.hpp"
#include "tailnet/norm.hpp"

namespace tailnet {

/// x -> h(x)^alpha.
inline Functional power_of(const Aggregation& h, double alpha) {
    return Functional{{h}, [alpha](std::span<const double> v) { return pow0(v[0], alpha); }};
}

/// C_ind^i = sum_j K_j E A_ij^alpha.
inline Estimate c_ind_agent(const MarketSpec& spec, std::size_t i, const EvalMethod& method) {
    const Functional f = power_of(Projection{i}, spec.alpha);
    return column_sums(spec, std::span(&f, 1), method)[0];
}

/// C_ind^S = sum_j K_j E ||A e_j||_r^alpha.
inline Estimate c_ind_sys(const MarketSpec& spec, const NormSpec& norm, const EvalMethod& method) {
    const Functional f = power_of(NormAggregation{norm}, spec.alpha);
    return column_sums(spec, std::span(&f, 1), method)[0];
}

struct DepConstants {
    std::vector<Estimate> agent;  // C_dep^i
    Estimate system;              // C_dep^S
};

/// C_dep^i = E (A K^{1/alpha} 1)_i^alpha and C_dep^S = E ||A K^{1/alpha} 1||_r^alpha.
inline DepConstants c_dep_constants(const MarketSpec& spec, const NormSpec& norm, const EvalMethod& method) {
    std::vector<Functional> fs;
    fs.reserve(spec.q + 1);
    for (std::size_t i = 0; i < spec.q; ++i) fs.push_back(power_of(Projection{i}, spec.alpha));
    fs.push_back(power_of(NormAggregation{norm}, spec.alpha));
    auto est = direction_expectations(spec, fs, method);
    DepConstants out;
    out.system = est.back();
    est.pop_back();
    out.agent = std::move(est);
    return out;
}

/// C^h in the market's own dependence regime.
inline Estimate c_agg_generic(const MarketSpec& spec, const Aggregation& h, const EvalMethod& method) {
    const Functional f = power_of(h, spec.alpha);
    return regime_expectations(spec, std::span(&f, 1), method)[0];
}

/// VaR_{1-gamma} ~ C^{1/alpha} gamma^{-1/alpha} as gamma -> 0.
inline double var_asymptotic(double c, double alpha, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    if (c < 0.0) throw DomainError("tail constant must be nonnegative");
    if (c == 0.0) return 0.0;
    return std::pow(c, 1.0 / alpha) * std::pow(gamma, -1.0 / alpha);
}

/// CoTE_{1-gamma} ~ alpha/(alpha-1) VaR_{1-gamma}; needs a finite mean.
inline double cote_asymptotic(double c, double alpha, double gamma) {
    if (!(alpha > 1.0)) throw DomainError("CoTE undefined: infinite mean regime (alpha <= 1)");
    return alpha / (alpha - 1.0) * var_asymptotic(c, alpha, gamma);
}

struct RiskConstants {
    std::vector<Estimate> c_ind_agent;
    Estimate c_ind_sys;
    std::vector<Estimate> c_dep_agent;
    Estimate c_dep_sys;
    NormSpec norm{1.0};
    EvalMethod ind_method;
    EvalMethod dep_method;
};

/// Every constant of both regimes. The independent-regime constants are
/// column sums, evaluated together so Monte Carlo estimates share graphs.
inline RiskConstants risk_constants(const MarketSpec& spec, const NormSpec& norm, const EvalMethod& ind_method,
                                    const EvalMethod& dep_method) {
    RiskConstants rc;
    rc.norm = norm;
    rc.ind_method = ind_method;
    rc.dep_method = dep_method;
    std::vector<Functional> fs;
    for (std::size_t i = 0; i < spec.q; ++i) fs.push_back(power_of(Projection{i}, spec.alpha));
    fs.push_back(power_of(NormAggregation{norm}, spec.alpha));
    auto ind = column_sums(spec, fs, ind_method);
    rc.c_ind_sys = ind.back();
    ind.pop_back();
    rc.c_ind_agent = std::move(ind);
    auto dep = c_dep_constants(spec, norm, dep_method);
    rc.c_dep_agent = std::move(dep.agent);
    rc.c_dep_sys = dep.system;
    return rc;
}

/// Exact for insurance markets; otherwise enumeration when it fits under
/// the ceiling, else Monte Carlo.
inline EvalMethod auto_method(const MarketSpec& spec, Regime regime, std::uint64_t seed = 0,
                              std::uint64_t mc_reps = 200000) {
    if (regime == Regime::AsymptoticallyIndependent) {
        if (spec.is_insurance()) return Exact{};
        if (spec.is_column_local() ? spec.q <= kEnumerationCeilingBits : spec.q * spec.d <= kEnumerationCeilingBits)
            return Enumeration{};
        return MonteCarlo{mc_reps, seed};
    }
    if (spec.q * spec.d <= kEnumerationCeilingBits) return Enumeration{};
    return MonteCarlo{mc_reps, seed};
}

inline EvalMethod auto_method(const MarketSpec& spec) { return auto_method(spec, spec.regime); }

}  // namespace tailnet
