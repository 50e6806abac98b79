#pragma once

// Poisson surrogates for the insurance-rule constants and min-terms. The
// degree of column j seen from agent i is 1 + (a Poisson-binomial count of
// the other agents); replacing that count by a Poisson variable of equal
// mean costs at most the Stein-Chen total-variation bound
// min(1, 1/lambda) sum p^2 for any test function with values in [0,1].

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

inline constexpr double kPoissonTol = 1e-14;

namespace detail {

// lgamma(m + 1) - (m + 1/2) log m + m - log(2 pi)/2, for m >= 16.
inline double stirling_error(double m) {
    const double m2 = m * m;
    return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * m2)) / m2) / m2) / m;
}

// m log(m / lambda) + lambda - m, without the cancellation near m = lambda.
inline double deviance_term(double m, double lambda) {
    if (std::abs(m - lambda) < 0.1 * (m + lambda)) {
        const double v = (m - lambda) / (m + lambda);
        double s = (m - lambda) * v, ej = 2.0 * m * v;
        const double v2 = v * v;
        for (int j = 1; j < 1000; ++j) {
            ej *= v2;
            const double s1 = s + ej / (2 * j + 1);
            if (s1 == s) return s1;
            s = s1;
        }
        return s;
    }
    return m * std::log(m / lambda) + lambda - m;
}

// Poisson pmf in the saddle-point form, accurate to a few ulps for large lambda.
inline double poisson_pmf(std::size_t k, double lambda, double log_lambda) {
    const double m = static_cast<double>(k);
    if (k < 16) return std::exp(-lambda + m * log_lambda - std::lgamma(m + 1.0));
    constexpr double two_pi = 6.283185307179586476925;
    return std::exp(-stirling_error(m) - deviance_term(m, lambda)) / std::sqrt(two_pi * m);
}

}  // namespace detail

/// E f(Z) for Z ~ Poisson(lambda), truncated once the remaining mass is
/// below tol.
template <typename F>
double pois_expect(double lambda, F&& f, double tol = kPoissonTol) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw DomainError("Poisson mean must be finite and nonnegative");
    if (!(tol > 0.0)) throw DomainError("tolerance must be positive");
    if (lambda == 0.0) return static_cast<double>(f(std::size_t{0}));
    const double log_lambda = std::log(lambda);
    auto pmf = [&](std::size_t m) { return detail::poisson_pmf(m, lambda, log_lambda); };
    long double s = 0.0L;
    for (std::size_t m = 0;; ++m) {
        s += static_cast<long double>(pmf(m)) * static_cast<long double>(f(m));
        const double next = static_cast<double>(m + 2);
        if (next > lambda) {
            // Geometric domination of the tail beyond m.
            const double tail = pmf(m + 1) / (1.0 - lambda / next);
            if (tail <= tol) break;
        }
    }
    return static_cast<double>(s);
}

struct PoissonParams {
    double lambda_j = 0.0;     // sum_k p_kj
    double lambda_j_i = 0.0;   // without agent i
    double lambda_j_ik = 0.0;  // without agents i and k
};

inline PoissonParams poisson_params(const MarketSpec& spec, std::size_t j, std::optional<std::size_t> i = {},
                                    std::optional<std::size_t> k = {}) {
    PoissonParams out;
    long double all = 0.0L, no_i = 0.0L, no_ik = 0.0L;
    for (std::size_t l = 0; l < spec.q; ++l) {
        const long double p = spec.edge_probs(l, j);
        all += p;
        if (i && l == *i) continue;
        no_i += p;
        if (k && l == *k) continue;
        no_ik += p;
    }
    out.lambda_j = static_cast<double>(all);
    out.lambda_j_i = static_cast<double>(no_i);
    out.lambda_j_ik = static_cast<double>(no_ik);
    return out;
}

struct ApproxWithBound {
    double approx = 0.0;
    double bound = 0.0;
    std::optional<double> exact;

    /// |approx - exact| <= bound, allowing only for floating-point rounding
    /// and the Poisson series truncation (scale * tol).
    bool satisfied(double scale = 1.0) const {
        if (!exact) return true;
        const double slack = 64.0 * std::numeric_limits<double>::epsilon() * std::max({1.0, std::abs(*exact)}) +
                             kPoissonTol * std::abs(scale);
        return std::abs(approx - *exact) <= bound + slack;
    }
};

/// Per-object terms and their K-weighted total.
struct ApproxTable {
    std::vector<ApproxWithBound> per_object;
    ApproxWithBound total;
    double slack_scale = 1.0;  // bound on |test function|, for satisfied()

    bool all_satisfied() const {
        if (!total.satisfied(slack_scale)) return false;
        return std::all_of(per_object.begin(), per_object.end(),
                           [&](const ApproxWithBound& a) { return a.satisfied(slack_scale); });
    }
};

namespace detail {

inline double inv_or_one(double lambda) { return lambda > 1.0 ? 1.0 / lambda : 1.0; }

inline void require_poisson_model(const MarketSpec& spec) {
    require_valid(spec);
    if (!spec.is_insurance())
        throw InfeasibleError("Poisson approximations are stated for the insurance weight rule only");
}

inline void require_r_at_least_one(const NormSpec& norm, const char* what) {
    if (!norm.is_max() && norm.r() < 1.0) throw DomainError(std::string(what) + " stated only for r >= 1");
}

inline double sum_sq_excluding(const MarketSpec& spec, std::size_t j, std::optional<std::size_t> skip) {
    long double s = 0.0L;
    for (std::size_t l = 0; l < spec.q; ++l) {
        if (skip && l == *skip) continue;
        const long double p = spec.edge_probs(l, j);
        s += p * p;
    }
    return static_cast<double>(s);
}

inline void accumulate(ApproxTable& t, const MarketSpec& spec) {
    long double a = 0.0L, b = 0.0L, e = 0.0L;
    bool have_exact = true;
    for (std::size_t j = 0; j < t.per_object.size(); ++j) {
        const long double kj = spec.k_coeffs[j];
        a += kj * t.per_object[j].approx;
        b += kj * t.per_object[j].bound;
        if (t.per_object[j].exact)
            e += kj * *t.per_object[j].exact;
        else
            have_exact = false;
    }
    t.total.approx = static_cast<double>(a);
    t.total.bound = static_cast<double>(b);
    if (have_exact) t.total.exact = static_cast<double>(e);
    long double ks = 0.0L;
    for (double k : spec.k_coeffs) ks += k;
    t.slack_scale *= static_cast<double>(std::max(1.0L, ks));
}

}  // namespace detail

/// B(i,j) = p_ij min(1, 1/lambda_j^i) sum_{k != i} p_kj^2.
inline double bound_b_ij(const MarketSpec& spec, std::size_t i, std::size_t j) {
    const auto pp = poisson_params(spec, j, i);
    return spec.edge_probs(i, j) * detail::inv_or_one(pp.lambda_j_i) * detail::sum_sq_excluding(spec, j, i);
}

/// B(j) = min(1, 1/lambda_j) sum_k p_kj^2.
inline double bound_b_j(const MarketSpec& spec, std::size_t j) {
    const auto pp = poisson_params(spec, j);
    return detail::inv_or_one(pp.lambda_j) * detail::sum_sq_excluding(spec, j, std::nullopt);
}

/// B(i,j,k) = min(1, 1/lambda_j^{i,k}) sum_{l != i} p_lj^2.
inline double bound_b_ijk(const MarketSpec& spec, std::size_t i, std::size_t j, std::size_t k) {
    const auto pp = poisson_params(spec, j, i, k);
    return detail::inv_or_one(pp.lambda_j_ik) * detail::sum_sq_excluding(spec, j, i);
}

/// C_ind^i ~ sum_j K_j p_ij E(1 + X_j^i)^{-alpha}, bound sum_j K_j B(i,j).
inline ApproxTable approx_c_ind_agent(const MarketSpec& spec, std::size_t i, bool with_exact = true) {
    detail::require_poisson_model(spec);
    if (i >= spec.q) throw ConfigError("agent index out of range");
    const double alpha = spec.alpha;
    ApproxTable t;
    const Functional f = power_of(Projection{i}, alpha);
    for (std::size_t j = 0; j < spec.d; ++j) {
        const auto pp = poisson_params(spec, j, i);
        ApproxWithBound a;
        a.approx = spec.edge_probs(i, j) *
                   pois_expect(pp.lambda_j_i, [&](std::size_t m) { return std::pow(1.0 + m, -alpha); });
        a.bound = bound_b_ij(spec, i, j);
        if (with_exact) a.exact = exact_column_expectation(spec, j, f);
        t.per_object.push_back(a);
    }
    detail::accumulate(t, spec);
    return t;
}

/// C_ind^S ~ sum_j K_j E[1{X_j >= 1} X_j^{alpha(1/r - 1)}], bound sum_j K_j B(j).
inline ApproxTable approx_c_ind_sys(const MarketSpec& spec, const NormSpec& norm, bool with_exact = true) {
    detail::require_poisson_model(spec);
    detail::require_r_at_least_one(norm, "Poisson system approximation");
    const double alpha = spec.alpha;
    const double e = alpha * norm.share_exponent();
    ApproxTable t;
    const Functional f = power_of(NormAggregation{norm}, alpha);
    for (std::size_t j = 0; j < spec.d; ++j) {
        const auto pp = poisson_params(spec, j);
        ApproxWithBound a;
        a.approx = pois_expect(pp.lambda_j, [&](std::size_t m) { return m == 0 ? 0.0 : std::pow(double(m), e); });
        a.bound = bound_b_j(spec, j);
        if (with_exact) a.exact = exact_column_expectation(spec, j, f);
        t.per_object.push_back(a);
    }
    detail::accumulate(t, spec);
    return t;
}

/// Poisson surrogates of the three min-formula limits. `ags` is agent i
/// given the system, `sga` the system given agent i, `aga` agent i given
/// agent k. Totals are the K-weighted sums, i.e. the limits themselves.
struct MinTermApprox {
    ApproxTable ags;
    ApproxTable sga;
    std::optional<ApproxTable> aga;
    double m1 = 0.0, m2 = 0.0;
    std::optional<double> m3;
    double c_i = 0.0, c_sys = 0.0;
    std::optional<double> c_k;
    bool poisson_constants = false;  // constants themselves Poisson-approximated
};

enum class ConstantSource { Exact, Poisson };

inline MinTermApprox approx_min_terms(const MarketSpec& spec, const NormSpec& norm, std::size_t i,
                                      std::optional<std::size_t> k, double kappa,
                                      ConstantSource source = ConstantSource::Exact) {
    detail::require_poisson_model(spec);
    detail::require_r_at_least_one(norm, "Poisson min-term approximation");
    if (i >= spec.q || (k && *k >= spec.q)) throw ConfigError("agent index out of range");
    if (k && *k == i) throw DomainError("agents i and k must differ");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw DomainError("kappa must be positive");
    const double alpha = spec.alpha;

    MinTermApprox out;
    out.poisson_constants = source == ConstantSource::Poisson;
    if (out.poisson_constants) {
        out.c_i = approx_c_ind_agent(spec, i, false).total.approx;
        out.c_sys = approx_c_ind_sys(spec, norm, false).total.approx;
        if (k) out.c_k = approx_c_ind_agent(spec, *k, false).total.approx;
    } else {
        out.c_i = c_ind_agent(spec, i, Exact{}).value;
        out.c_sys = c_ind_sys(spec, norm, Exact{}).value;
        if (k) out.c_k = c_ind_agent(spec, *k, Exact{}).value;
    }
    if (!(out.c_i > 0.0) || !(out.c_sys > 0.0) || (k && !(*out.c_k > 0.0)))
        throw DomainError("agent asymptotically riskless (zero constant)");
    const double ci = out.c_i, cs = out.c_sys;
    out.m1 = std::min(kappa / ci, 1.0 / cs);
    out.m2 = std::min(1.0 / ci, kappa / cs);
    if (k) out.m3 = std::min(kappa / ci, 1.0 / *out.c_k);

    const double es = alpha * norm.share_exponent();  // ||A e_j||^alpha = deg^es
    const Functional f_ags{{Projection{i}, NormAggregation{norm}}, [=](std::span<const double> v) {
                               return std::min(pow0(v[1], alpha) / cs, kappa * pow0(v[0], alpha) / ci);
                           }};
    const Functional f_sga{{Projection{i}, NormAggregation{norm}}, [=](std::span<const double> v) {
                               return std::min(kappa * pow0(v[1], alpha) / cs, pow0(v[0], alpha) / ci);
                           }};
    std::optional<Functional> f_aga;
    if (k) {
        const double ck = *out.c_k;
        f_aga = Functional{{Projection{i}, Projection{*k}}, [=](std::span<const double> v) {
                               return std::min(kappa * pow0(v[0], alpha) / ci, pow0(v[1], alpha) / ck);
                           }};
        out.aga.emplace();
    }

    for (std::size_t j = 0; j < spec.d; ++j) {
        const auto pp = poisson_params(spec, j, i, k);
        const double pij = spec.edge_probs(i, j);
        const double bij = bound_b_ij(spec, i, j);

        ApproxWithBound ags;
        ags.approx = pij * pois_expect(pp.lambda_j_i, [&](std::size_t m) {
                         const double deg = 1.0 + m;
                         return std::min(std::pow(deg, es) / cs, kappa * std::pow(deg, -alpha) / ci);
                     });
        ags.bound = out.m1 * bij;
        ags.exact = exact_column_expectation(spec, j, f_ags);
        out.ags.per_object.push_back(ags);

        ApproxWithBound sga;
        sga.approx = pij * pois_expect(pp.lambda_j_i, [&](std::size_t m) {
                         const double deg = 1.0 + m;
                         return std::min(kappa * std::pow(deg, es) / cs, std::pow(deg, -alpha) / ci);
                     });
        sga.bound = out.m2 * bij;
        sga.exact = exact_column_expectation(spec, j, f_sga);
        out.sga.per_object.push_back(sga);

        if (k) {
            const double pp2 = pij * spec.edge_probs(*k, j);
            ApproxWithBound aga;
            aga.approx = pp2 * *out.m3 *
                         pois_expect(pp.lambda_j_ik, [&](std::size_t m) { return std::pow(2.0 + m, -alpha); });
            aga.bound = pp2 * *out.m3 * bound_b_ijk(spec, i, j, *k);
            aga.exact = exact_column_expectation(spec, j, *f_aga);
            out.aga->per_object.push_back(aga);
        }
    }
    out.ags.slack_scale = out.m1;
    out.sga.slack_scale = out.m2;
    detail::accumulate(out.ags, spec);
    detail::accumulate(out.sga, spec);
    if (k) {
        out.aga->slack_scale = *out.m3;
        detail::accumulate(*out.aga, spec);
    }
    return out;
}

/// Poisson surrogates of the CoTE numerators: E A_ij ||A e_j||^{a-1} (as),
/// E A_ij^{a-1} ||A e_j|| (sa) and E A_kj^{a-1} A_ij (mm).
struct CoteTermApprox {
    ApproxTable as;
    ApproxTable sa;
    std::optional<ApproxTable> mm;
};

inline CoteTermApprox approx_cote_terms(const MarketSpec& spec, const NormSpec& norm, std::size_t i,
                                        std::optional<std::size_t> k) {
    detail::require_poisson_model(spec);
    detail::require_r_at_least_one(norm, "Poisson CoTE approximation");
    if (!(spec.alpha > 1.0)) throw DomainError("CoTE undefined: infinite mean regime (alpha <= 1)");
    if (i >= spec.q || (k && *k >= spec.q)) throw ConfigError("agent index out of range");
    if (k && *k == i) throw DomainError("agents i and k must differ");
    const double alpha = spec.alpha;
    const double s = norm.share_exponent();
    // A_ij ||A e_j||^{a-1} = deg^{-(1 - s(a-1))} and A_ij^{a-1} ||A e_j|| = deg^{-(a-1) + s} on i~j.
    const double e_as = -(1.0 - s * (alpha - 1.0));
    const double e_sa = -(alpha - 1.0) + s;

    const Functional f_as{{Projection{i}, NormAggregation{norm}},
                          [alpha](std::span<const double> v) { return v[0] * pow0(v[1], alpha - 1.0); }};
    const Functional f_sa{{Projection{i}, NormAggregation{norm}},
                          [alpha](std::span<const double> v) { return pow0(v[0], alpha - 1.0) * v[1]; }};
    std::optional<Functional> f_mm;
    CoteTermApprox out;
    if (k) {
        f_mm = Functional{{Projection{i}, Projection{*k}},
                          [alpha](std::span<const double> v) { return pow0(v[1], alpha - 1.0) * v[0]; }};
        out.mm.emplace();
    }
    for (std::size_t j = 0; j < spec.d; ++j) {
        const auto pp = poisson_params(spec, j, i, k);
        const double pij = spec.edge_probs(i, j);
        const double bij = bound_b_ij(spec, i, j);

        ApproxWithBound as;
        as.approx = pij * pois_expect(pp.lambda_j_i, [&](std::size_t m) { return std::pow(1.0 + m, e_as); });
        as.bound = bij;
        as.exact = exact_column_expectation(spec, j, f_as);
        out.as.per_object.push_back(as);

        ApproxWithBound sa;
        sa.approx = pij * pois_expect(pp.lambda_j_i, [&](std::size_t m) { return std::pow(1.0 + m, e_sa); });
        sa.bound = bij;
        sa.exact = exact_column_expectation(spec, j, f_sa);
        out.sa.per_object.push_back(sa);

        if (k) {
            const double pp2 = pij * spec.edge_probs(*k, j);
            ApproxWithBound mm;
            mm.approx = pp2 * pois_expect(pp.lambda_j_ik, [&](std::size_t m) { return std::pow(2.0 + m, -alpha); });
            mm.bound = pp2 * bound_b_ijk(spec, i, j, *k);
            mm.exact = exact_column_expectation(spec, j, *f_mm);
            out.mm->per_object.push_back(mm);
        }
    }
    detail::accumulate(out.as, spec);
    detail::accumulate(out.sa, spec);
    if (k) detail::accumulate(*out.mm, spec);
    return out;
}

}  // namespace tailnet
