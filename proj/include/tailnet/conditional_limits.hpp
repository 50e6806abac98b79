#pragma once

// Asymptotic conditional risk measures. For aggregations g (conditioned)
// and h (conditioning):
//
//   P(g(F) > t | h(F) > ut)                 -> (C^h)^-1 sum E min{h^a, u^a g^a}
//   P(g > VaR_{1-gk}(g) | h > VaR_{1-g}(h)) -> sum E min{h^a / C^h, k g^a / C^g}
//   E[g(F) | h(F) > t]                     ~  a/(a-1) (C^h)^-1 sum E[g h^(a-1)] t
//
// where "sum E" runs over columns A K^{1/a} e_j when claims are
// asymptotically independent and is the single term at A K^{1/a} 1 when
// they are fully dependent.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailnet/error.hpp"
#include "tailnet/expectation.hpp"
#include "tailnet/market.hpp"
#include "tailnet/norm.hpp"
#include "tailnet/risk_constants.hpp"

namespace tailnet {

struct CondTarget {
    Aggregation g;  // conditioned
    Aggregation h;  // conditioning
};

namespace detail {

inline void require_nonzero_constants(const Aggregation& g, double cg, const Aggregation& h, double ch) {
    for (const auto* a : {&g, &h}) {
        const double c = a == &g ? cg : ch;
        if (c > 0.0) continue;
        if (is_projection(*a)) throw DomainError("agent asymptotically riskless");
        throw DomainError("conditioning event asymptotically null (empty market)");
    }
}

// Ratio of two Monte Carlo means; the covariance term is dropped.
inline Estimate ratio(const Estimate& num, double scale, const Estimate& den) {
    Estimate out;
    out.value = scale * num.value / den.value;
    if (num.std_error > 0.0 || den.std_error > 0.0) {
        const double rn = num.value != 0.0 ? num.std_error / num.value : 0.0;
        const double rd = den.std_error / den.value;
        out.std_error = std::abs(out.value) * std::sqrt(rn * rn + rd * rd);
        if (num.value == 0.0) out.std_error = scale * num.std_error / den.value;
    }
    return out;
}

inline std::pair<Estimate, Estimate> pair_constants(const MarketSpec& spec, const Aggregation& g, const Aggregation& h,
                                                    const EvalMethod& method) {
    const std::vector<Functional> fs{power_of(g, spec.alpha), power_of(h, spec.alpha)};
    const auto c = regime_expectations(spec, fs, method);
    return {c[0], c[1]};
}

inline void require_agent(const MarketSpec& spec, std::size_t i) {
    if (i >= spec.q)
        throw ConfigError("agent index " + std::to_string(i + 1) + " out of range 1.." + std::to_string(spec.q));
}

}  // namespace detail

/// Limit of P(g(F) > t | h(F) > ut) as t -> infinity.
inline Estimate cond_prob_limit(const MarketSpec& spec, const CondTarget& target, double u, const EvalMethod& method) {
    if (!(u > 0.0) || !std::isfinite(u)) throw DomainError("u must be positive");
    const double alpha = spec.alpha;
    const Estimate ch = c_agg_generic(spec, target.h, method);
    if (!(ch.value > 0.0)) throw DomainError("conditioning event asymptotically null (empty market)");
    const double ua = std::pow(u, alpha);
    const Functional f{{target.g, target.h}, [alpha, ua](std::span<const double> v) {
                           return std::min(pow0(v[1], alpha), ua * pow0(v[0], alpha));
                       }};
    const auto num = regime_expectations(spec, std::span(&f, 1), method)[0];
    return detail::ratio(num, 1.0, ch);
}

/// sum E min{h^a / C^h, kappa g^a / C^g} for every kappa, sharing one
/// evaluation of the constants.
inline std::vector<Estimate> tail_dep_curve(const MarketSpec& spec, const CondTarget& target,
                                            std::span<const double> kappas, const EvalMethod& method) {
    for (double k : kappas)
        if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("kappa must be positive");
    const auto [cg, ch] = detail::pair_constants(spec, target.g, target.h, method);
    detail::require_nonzero_constants(target.g, cg.value, target.h, ch.value);
    const double alpha = spec.alpha;
    const double inv_g = 1.0 / cg.value, inv_h = 1.0 / ch.value;
    std::vector<Functional> fs;
    fs.reserve(kappas.size());
    for (double kappa : kappas)
        fs.push_back(Functional{{target.g, target.h}, [=](std::span<const double> v) {
                                    return std::min(pow0(v[1], alpha) * inv_h, kappa * pow0(v[0], alpha) * inv_g);
                                }});
    auto out = regime_expectations(spec, fs, method);
    for (auto& e : out) e.value = std::clamp(e.value, 0.0, 1.0);
    return out;
}

inline Estimate tail_dep(const MarketSpec& spec, const CondTarget& target, double kappa, const EvalMethod& method) {
    return tail_dep_curve(spec, target, std::span(&kappa, 1), method)[0];
}

/// Agent i given the system (ICoVaR-generating limit).
inline Estimate tail_dep_agent_given_sys(const MarketSpec& spec, const NormSpec& norm, std::size_t i, double kappa,
                                         const EvalMethod& method) {
    detail::require_agent(spec, i);
    return tail_dep(spec, {Projection{i}, NormAggregation{norm}}, kappa, method);
}

/// The system given agent i (SCoVaR-generating limit).
inline Estimate tail_dep_sys_given_agent(const MarketSpec& spec, const NormSpec& norm, std::size_t i, double kappa,
                                         const EvalMethod& method) {
    detail::require_agent(spec, i);
    return tail_dep(spec, {NormAggregation{norm}, Projection{i}}, kappa, method);
}

/// Agent i given agent k (MCoVaR-generating limit).
inline Estimate tail_dep_agent_given_agent(const MarketSpec& spec, std::size_t i, std::size_t k, double kappa,
                                           const EvalMethod& method) {
    detail::require_agent(spec, i);
    detail::require_agent(spec, k);
    if (i == k) throw DomainError("agents i and k must differ");
    return tail_dep(spec, {Projection{i}, Projection{k}}, kappa, method);
}

/// Coefficient c with E[g(F) | h(F) > t] ~ c t.
inline Estimate cond_expect_coefficient(const MarketSpec& spec, const CondTarget& target, const EvalMethod& method) {
    const double alpha = spec.alpha;
    if (!(alpha > 1.0)) throw DomainError("conditional expectation undefined: infinite mean regime (alpha <= 1)");
    const Estimate ch = c_agg_generic(spec, target.h, method);
    if (!(ch.value > 0.0)) throw DomainError("conditioning event asymptotically null (empty market)");
    const Functional f{{target.g, target.h},
                       [alpha](std::span<const double> v) { return v[0] * pow0(v[1], alpha - 1.0); }};
    const auto num = regime_expectations(spec, std::span(&f, 1), method)[0];
    return detail::ratio(num, alpha / (alpha - 1.0), ch);
}

inline Estimate cond_expect_limit(const MarketSpec& spec, const CondTarget& target, double t,
                                  const EvalMethod& method) {
    if (!(t > 0.0)) throw DomainError("t must be positive");
    Estimate c = cond_expect_coefficient(spec, target, method);
    c.value *= t;
    c.std_error *= t;
    return c;
}

/// Prefactors of gamma^{-1/alpha} in ICoTE (as), SCoTE (sa) and, when k is
/// given, MCoTE of agent i given agent k (mm).
struct CoteConstants {
    Estimate as;
    Estimate sa;
    std::optional<Estimate> mm;
};

namespace detail {

// a/(a-1) (C^h)^{1/a - 1} sum E[g h^(a-1)]
inline Estimate cote_constant(const MarketSpec& spec, const Aggregation& g, const Aggregation& h,
                              const EvalMethod& method) {
    const double alpha = spec.alpha;
    const auto [cg, ch] = pair_constants(spec, g, h, method);
    require_nonzero_constants(g, cg.value, h, ch.value);
    const Functional f{{g, h}, [alpha](std::span<const double> v) { return v[0] * pow0(v[1], alpha - 1.0); }};
    const auto num = regime_expectations(spec, std::span(&f, 1), method)[0];
    const double scale = alpha / (alpha - 1.0) * std::pow(ch.value, 1.0 / alpha);
    return ratio(num, scale, ch);
}

}  // namespace detail

inline CoteConstants cote_constants(const MarketSpec& spec, const NormSpec& norm, std::size_t i,
                                    std::optional<std::size_t> k, const EvalMethod& method) {
    if (!(spec.alpha > 1.0)) throw DomainError("CoTE undefined: infinite mean regime (alpha <= 1)");
    detail::require_agent(spec, i);
    CoteConstants out;
    out.as = detail::cote_constant(spec, Projection{i}, NormAggregation{norm}, method);
    out.sa = detail::cote_constant(spec, NormAggregation{norm}, Projection{i}, method);
    if (k) {
        detail::require_agent(spec, *k);
        if (*k == i) throw DomainError("agents i and k must differ");
        out.mm = detail::cote_constant(spec, Projection{i}, Projection{*k}, method);
    }
    return out;
}

/// Linear-regime thresholds for the insurance rule.
struct KappaThresholds {
    double w = 0.0;        // lower weight envelope
    double W_bound = 0.0;  // upper weight envelope
    double b = 0.0;        // lower norm envelope over nonempty columns
    double B_bound = 0.0;  // upper norm envelope over nonempty columns
    double kappa0 = 0.0;
    double kappa1 = 0.0;
    std::optional<double> kappa2;
    double tau_i = 0.0;
    std::optional<double> tau_ik;
    double c_i = 0.0;
    double c_sys = 0.0;
    std::optional<double> c_k;
};

/// Envelopes of deg^{1/r - 1} over deg = 1..q: {min, max}.
inline std::pair<double, double> norm_envelope(std::size_t q, const NormSpec& norm) {
    const double e = norm.share_exponent();
    const double at_q = std::pow(static_cast<double>(q), e);
    return e <= 0.0 ? std::pair{at_q, 1.0} : std::pair{1.0, at_q};
}

/// Every column-sum input shares one evaluation; indices are zero-based.
/// The independent-regime constants are used regardless of spec.regime.
inline KappaThresholds thresholds(const MarketSpec& spec, const NormSpec& norm, std::size_t i,
                                  std::optional<std::size_t> k, const EvalMethod& method = Exact{}) {
    if (!spec.is_insurance()) throw InfeasibleError("thresholds need the insurance weight rule (bounded envelopes)");
    detail::require_agent(spec, i);
    if (k) {
        detail::require_agent(spec, *k);
        if (*k == i) throw DomainError("agents i and k must differ");
    }
    const double alpha = spec.alpha;
    std::vector<Functional> fs{power_of(Projection{i}, alpha), power_of(NormAggregation{norm}, alpha)};
    // 1(i~j) ||A e_j||^a
    fs.push_back(Functional{{Projection{i}, NormAggregation{norm}}, [alpha](std::span<const double> v) {
                                return v[0] > 0.0 ? pow0(v[1], alpha) : 0.0;
                            }});
    if (k) {
        fs.push_back(power_of(Projection{*k}, alpha));
        // 1(k~j) A_ij^a
        fs.push_back(Functional{{Projection{i}, Projection{*k}}, [alpha](std::span<const double> v) {
                                    return v[1] > 0.0 ? pow0(v[0], alpha) : 0.0;
                                }});
    }
    const auto s = column_sums(spec, fs, method);

    KappaThresholds t;
    t.c_i = s[0].value;
    t.c_sys = s[1].value;
    if (!(t.c_i > 0.0)) throw DomainError("agent asymptotically riskless");
    t.w = 1.0 / static_cast<double>(spec.q);
    t.W_bound = 1.0;
    std::tie(t.b, t.B_bound) = norm_envelope(spec.q, norm);
    t.kappa0 = std::pow(t.b, alpha) / t.c_sys * t.c_i / std::pow(t.W_bound, alpha);
    t.kappa1 = t.c_sys / t.c_i * std::pow(t.w, alpha) / std::pow(t.B_bound, alpha);
    t.tau_i = std::min(1.0, s[2].value / t.c_sys);
    if (k) {
        t.c_k = s[3].value;
        if (!(*t.c_k > 0.0)) throw DomainError("agent asymptotically riskless");
        t.kappa2 = t.c_i / *t.c_k * std::pow(t.w / t.W_bound, alpha);
        t.tau_ik = std::min(1.0, s[4].value / t.c_i);
    }
    return t;
}

/// An asymptotic conditional VaR. Outside the linear regime `value` comes
/// from inverting the min-formula limit numerically.
struct CovarResult {
    double value = 0.0;
    bool in_linear_regime = true;
    double min_formula_limit = 0.0;  // the limit curve evaluated at the requested level
    double kappa_star = 0.0;         // level solving limit(kappa) = target
    std::string flag;
};

namespace detail {

inline void require_probability(double g, const char* name) {
    if (!(g > 0.0 && g < 1.0)) throw DomainError(std::string(name) + " must lie in (0,1)");
}

inline void require_independent_regime(const MarketSpec& spec) {
    if (spec.regime != Regime::AsymptoticallyIndependent)
        throw InfeasibleError("CoVaR asymptotics are implemented for asymptotically independent claims");
}

// Smallest kappa with L(kappa) >= target for a nondecreasing L, by bisection
// in log kappa. NaN when the target exceeds sup L.
template <typename L>
double invert_curve(L&& curve, double target) {
    double hi = 1.0;
    int grow = 0;
    while (curve(hi) < target) {
        hi *= 16.0;
        if (++grow > 40) return std::numeric_limits<double>::quiet_NaN();
    }
    double lo = hi;
    while (curve(lo) >= target && lo > 1e-300) lo /= 16.0;
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-14; ++it) {
        const double mid = std::sqrt(lo * hi);
        (curve(mid) >= target ? hi : lo) = mid;
    }
    return hi;
}

inline void fill_outside(CovarResult& r, const MarketSpec& spec, const CondTarget& target, double level,
                         double request, const EvalMethod& method) {
    r.in_linear_regime = false;
    r.flag = "outside linear regime";
    r.min_formula_limit = tail_dep(spec, target, level, method).value;
    r.kappa_star = invert_curve([&](double kappa) { return tail_dep(spec, target, kappa, method).value; }, request);
    if (std::isnan(r.kappa_star)) r.flag += "; target above limiting conditional probability";
}

}  // namespace detail

/// VaR of agent i at level gamma_i given the system beyond its VaR_{1-gamma}.
inline CovarResult icovar(const MarketSpec& spec, const NormSpec& norm, std::size_t i, double gamma_i, double gamma,
                          const EvalMethod& method = Exact{}) {
    detail::require_probability(gamma_i, "gamma_i");
    detail::require_probability(gamma, "gamma");
    detail::require_independent_regime(spec);
    const auto th = thresholds(spec, norm, i, std::nullopt, method);
    CovarResult r;
    if (gamma_i <= th.kappa0) {
        r.kappa_star = gamma_i;
        r.min_formula_limit = gamma_i;
        r.value = var_asymptotic(th.c_i, spec.alpha, gamma_i * gamma);
        return r;
    }
    detail::fill_outside(r, spec, {Projection{i}, NormAggregation{norm}}, gamma_i, gamma_i, method);
    r.value = std::isnan(r.kappa_star) ? r.kappa_star : var_asymptotic(th.c_i, spec.alpha, r.kappa_star * gamma);
    return r;
}

/// VaR of the system at level gamma given agent i beyond its VaR_{1-gamma_i}.
inline CovarResult scovar(const MarketSpec& spec, const NormSpec& norm, std::size_t i, double gamma_i, double gamma,
                          const EvalMethod& method = Exact{}) {
    detail::require_probability(gamma_i, "gamma_i");
    detail::require_probability(gamma, "gamma");
    detail::require_independent_regime(spec);
    const auto th = thresholds(spec, norm, i, std::nullopt, method);
    CovarResult r;
    if (th.tau_i > 0.0 && gamma <= th.kappa1 * th.tau_i) {
        r.kappa_star = gamma / th.tau_i;
        r.min_formula_limit = gamma;
        r.value = var_asymptotic(th.c_sys, spec.alpha, gamma_i * r.kappa_star);
        return r;
    }
    detail::fill_outside(r, spec, {NormAggregation{norm}, Projection{i}}, th.tau_i > 0.0 ? gamma / th.tau_i : gamma,
                         gamma, method);
    r.value = std::isnan(r.kappa_star) ? r.kappa_star : var_asymptotic(th.c_sys, spec.alpha, gamma_i * r.kappa_star);
    return r;
}

/// VaR of agent i at level gamma_i given agent k beyond its VaR_{1-gamma_k}.
inline CovarResult mcovar(const MarketSpec& spec, std::size_t i, std::size_t k, double gamma_i, double gamma_k,
                          const EvalMethod& method = Exact{}) {
    detail::require_probability(gamma_i, "gamma_i");
    detail::require_probability(gamma_k, "gamma_k");
    detail::require_independent_regime(spec);
    const auto th = thresholds(spec, NormSpec(1.0), i, k, method);
    const double tau = *th.tau_ik;
    CovarResult r;
    if (tau == 0.0) {
        // Asymptotically independent exposures: conditioning changes nothing.
        r.kappa_star = std::numeric_limits<double>::infinity();
        r.min_formula_limit = 0.0;
        r.value = var_asymptotic(th.c_i, spec.alpha, gamma_i);
        return r;
    }
    if (gamma_i <= *th.kappa2 * tau) {
        r.kappa_star = gamma_i / tau;
        r.min_formula_limit = gamma_i;
        r.value = var_asymptotic(th.c_i, spec.alpha, gamma_k * r.kappa_star);
        return r;
    }
    detail::fill_outside(r, spec, {Projection{i}, Projection{k}}, gamma_i / tau, gamma_i, method);
    r.value = std::isnan(r.kappa_star) ? r.kappa_star : var_asymptotic(th.c_i, spec.alpha, gamma_k * r.kappa_star);
    return r;
}

}  // namespace tailnet
