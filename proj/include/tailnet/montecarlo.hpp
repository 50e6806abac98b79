#pragma once

// Finite-gamma simulation of F = AV for comparison with the asymptotics.
//
// Replication r draws its graph from stream 2r and its claims from stream
// 2r + 1 of the configured seed, and writes its aggregated exposures into
// slot r. Statistics are computed afterwards on one thread, so a report
// depends only on (spec, config, targets), never on the worker count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tailnet/conditional_limits.hpp"
#include "tailnet/error.hpp"
#include "tailnet/expectation.hpp"
#include "tailnet/market.hpp"
#include "tailnet/norm.hpp"
#include "tailnet/parallel.hpp"
#include "tailnet/risk_constants.hpp"
#include "tailnet/rng.hpp"
#include "tailnet/uncovered.hpp"

namespace tailnet {

inline std::uint64_t claims_stream(std::uint64_t rep) { return 2 * rep + 1; }

/// V_j = K_j^{1/alpha} U_j^{-1/alpha}, an exact Pareto law on [K_j^{1/alpha}, inf).
inline void claims_from_uniforms(const MarketSpec& spec, std::span<const double> u, std::vector<double>& v) {
    v.resize(spec.d);
    const double inv = -1.0 / spec.alpha;
    for (std::size_t j = 0; j < spec.d; ++j) {
        const double uj = spec.regime == Regime::AsymptoticallyIndependent ? u[j] : u[0];
        v[j] = std::pow(spec.k_coeffs[j], 1.0 / spec.alpha) * std::pow(uj, inv);
    }
}

namespace detail {

inline void sample_claims_into(const MarketSpec& spec, std::uint64_t seed, std::uint64_t stream,
                               std::vector<double>& u, std::vector<double>& v) {
    const CounterStream rng(seed, stream);
    const std::size_t n = spec.regime == Regime::AsymptoticallyIndependent ? spec.d : 1;
    u.resize(n);
    for (std::size_t j = 0; j < n; ++j) u[j] = rng.uniform_open0(j);
    claims_from_uniforms(spec, u, v);
}

}  // namespace detail

/// Claims of one replication. Independent regime: one uniform per object;
/// fully dependent regime: one uniform shared by all objects (comonotone).
inline std::vector<double> sample_claims(const MarketSpec& spec, std::uint64_t seed, std::uint64_t stream = 1) {
    require_valid(spec);
    std::vector<double> u, v;
    detail::sample_claims_into(spec, seed, stream, u, v);
    return v;
}

/// Left-continuous empirical VaR of an ascending sample: the smallest order
/// statistic exceeded by at most a fraction gamma of the sample.
inline double empirical_var(std::span<const double> sorted, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie in (0,1)");
    const auto n = sorted.size();
    if (n == 0 || static_cast<double>(n) < std::ceil(1.0 / gamma - 1e-9))
        throw DomainError("insufficient samples for gamma");
    if (!std::is_sorted(sorted.begin(), sorted.end())) throw DomainError("samples must be sorted ascending");
    const auto m = static_cast<std::size_t>(std::floor(static_cast<double>(n) * gamma * (1.0 + 1e-12)));
    return sorted[n - m - 1];
}

/// Mean of the strict exceedances of the empirical VaR; empty when none.
inline std::optional<double> empirical_cote(std::span<const double> sorted, double gamma) {
    const double var = empirical_var(sorted, gamma);
    const auto first = std::upper_bound(sorted.begin(), sorted.end(), var);
    if (first == sorted.end()) return std::nullopt;
    long double s = 0.0L;
    for (auto it = first; it != sorted.end(); ++it) s += *it;
    return static_cast<double>(s / static_cast<long double>(sorted.end() - first));
}

/// Half-width of the distribution-free order-statistic interval
/// n(1-gamma) +- sqrt(n gamma (1-gamma)).
inline double empirical_var_stderr(std::span<const double> sorted, double gamma) {
    const double n = static_cast<double>(sorted.size());
    const double centre = n * (1.0 - gamma);
    const double half = std::sqrt(n * gamma * (1.0 - gamma));
    auto at = [&](double pos) {
        const double idx = std::clamp(std::ceil(pos), 1.0, n);
        return sorted[static_cast<std::size_t>(idx) - 1];
    };
    return (at(centre + half) - at(centre - half)) / 2.0;
}

struct SimConfig {
    std::uint64_t reps = 100000;
    std::uint64_t seed = 0;
    std::vector<double> gammas{0.1, 0.01, 0.001};
    NormSpec norm{1.0};
    bool resample_graph = true;
    unsigned workers = default_worker_count();
    std::optional<EvalMethod> asymptotic_method;  // default: auto_method(spec)
};

struct RiskTarget {
    enum class Kind { VaR, CoTE, TailDep };
    Kind kind = Kind::VaR;
    Aggregation g = Projection{0};
    std::optional<Aggregation> h;  // conditioning aggregation, TailDep only
    double kappa = 1.0;

    static RiskTarget var(Aggregation g) { return {Kind::VaR, std::move(g), std::nullopt, 1.0}; }
    static RiskTarget cote(Aggregation g) { return {Kind::CoTE, std::move(g), std::nullopt, 1.0}; }
    static RiskTarget tail_dep(Aggregation g, Aggregation h, double kappa = 1.0) {
        return {Kind::TailDep, std::move(g), std::move(h), kappa};
    }

    std::string label() const {
        switch (kind) {
            case Kind::VaR: return "VaR(" + tailnet::label(g) + ")";
            case Kind::CoTE: return "CoTE(" + tailnet::label(g) + ")";
            case Kind::TailDep: {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", kappa);
                return "TailDep(" + tailnet::label(g) + "|" + tailnet::label(*h) + ";kappa=" + buf + ")";
            }
        }
        return {};
    }
};

struct TailRecord {
    double gamma = 0.0;
    std::string target;
    std::optional<double> empirical;
    double std_error = 0.0;
    std::optional<double> asymptotic;
    std::vector<std::string> flags;

    std::optional<double> abs_gap() const {
        if (!empirical || !asymptotic) return std::nullopt;
        return *empirical - *asymptotic;
    }
    std::optional<double> rel_gap() const {
        if (!empirical || !asymptotic || *asymptotic == 0.0) return std::nullopt;
        return (*empirical - *asymptotic) / *asymptotic;
    }
};

struct EmpiricalTailReport {
    std::uint64_t reps = 0;
    std::uint64_t seed = 0;
    std::vector<TailRecord> records;

    bool any_flag() const {
        return std::any_of(records.begin(), records.end(), [](const TailRecord& r) { return !r.flags.empty(); });
    }
};

/// Realized graph behind fixed-graph mode, as a degenerate spec whose edge
/// probabilities are the realized 0/1 indicators. Its constants are the
/// constants conditional on that graph.
inline MarketSpec fix_graph(const MarketSpec& spec, std::uint64_t seed) {
    const auto sample = sample_adjacency(spec, seed, 0);
    MarketSpec fixed = spec;
    for (std::size_t i = 0; i < spec.q; ++i)
        for (std::size_t j = 0; j < spec.d; ++j) fixed.edge_probs(i, j) = sample.indicators(i, j);
    return fixed;
}

/// Aggregated exposures per replication: out[a][r] = aggs[a](A_r V_r).
inline std::vector<std::vector<double>> simulate_exposures(const MarketSpec& spec, std::span<const Aggregation> aggs,
                                                           std::uint64_t reps, std::uint64_t seed, unsigned workers) {
    require_valid(spec);
    if (reps == 0) throw ConfigError("reps must be at least 1");
    std::vector<std::vector<double>> out(aggs.size(), std::vector<double>(reps));
    const std::size_t n_blocks = static_cast<std::size_t>((reps + detail::kMonteCarloBlock - 1) / detail::kMonteCarloBlock);
    for_each_block(n_blocks, workers, [&](std::size_t b) {
        AdjacencySample sample;
        std::vector<double> u, v, f(spec.q);
        const std::uint64_t first = b * detail::kMonteCarloBlock;
        const std::uint64_t last = std::min<std::uint64_t>(reps, first + detail::kMonteCarloBlock);
        for (std::uint64_t r = first; r < last; ++r) {
            detail::sample_adjacency_into(spec, seed, graph_stream(r), sample);
            detail::sample_claims_into(spec, seed, claims_stream(r), u, v);
            for (std::size_t i = 0; i < spec.q; ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < spec.d; ++j) s += sample.weights(i, j) * v[j];
                f[i] = s;
            }
            for (std::size_t a = 0; a < aggs.size(); ++a) out[a][r] = evaluate(aggs[a], f);
        }
    });
    return out;
}

namespace detail {

inline constexpr double kLowRepsCount = 100.0;

inline double asymptotic_constant(const MarketSpec& spec, const Aggregation& g, const EvalMethod& method,
                                  std::map<std::string, double>& cache) {
    const auto key = label(g);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    const double c = c_agg_generic(spec, g, method).value;
    cache.emplace(key, c);
    return c;
}

}  // namespace detail

inline EmpiricalTailReport simulate(const MarketSpec& spec_in, const SimConfig& cfg,
                                    std::span<const RiskTarget> targets) {
    require_valid(spec_in);
    if (cfg.reps == 0) throw ConfigError("reps must be at least 1");
    for (double g : cfg.gammas)
        if (!(g > 0.0 && g < 1.0)) throw ConfigError("gammas must lie in (0,1)");
    for (const auto& t : targets) {
        if (t.kind == RiskTarget::Kind::TailDep && (!t.h || !(t.kappa > 0.0)))
            throw ConfigError("tail dependence target needs a conditioning aggregation and kappa > 0");
        for (const Aggregation* a : {&t.g, t.h ? &*t.h : nullptr})
            if (a)
                if (const auto* p = std::get_if<Projection>(a); p && p->agent >= spec_in.q)
                    throw ConfigError("agent index " + std::to_string(p->agent + 1) + " out of range");
    }

    const MarketSpec spec = cfg.resample_graph ? spec_in : fix_graph(spec_in, cfg.seed);

    // Distinct aggregations, in first-use order.
    std::vector<Aggregation> aggs;
    std::map<std::string, std::size_t> slot;
    auto add = [&](const Aggregation& a) {
        const auto key = label(a);
        if (slot.emplace(key, aggs.size()).second) aggs.push_back(a);
        return slot[key];
    };
    for (const auto& t : targets) {
        add(t.g);
        if (t.h) add(*t.h);
    }

    const auto raw = simulate_exposures(spec, aggs, cfg.reps, cfg.seed, cfg.workers);
    std::vector<std::vector<double>> sorted = raw;
    for (auto& s : sorted) std::sort(s.begin(), s.end());

    const EvalMethod method = cfg.asymptotic_method ? *cfg.asymptotic_method : auto_method(spec);
    std::map<std::string, double> constants;

    EmpiricalTailReport report;
    report.reps = cfg.reps;
    report.seed = cfg.seed;
    const double n = static_cast<double>(cfg.reps);

    for (double gamma : cfg.gammas) {
        for (const auto& t : targets) {
            TailRecord rec;
            rec.gamma = gamma;
            rec.target = t.label();
            const double level = t.kind == RiskTarget::Kind::TailDep ? gamma * t.kappa : gamma;
            if (n * std::min(gamma, level) < detail::kLowRepsCount) rec.flags.emplace_back("low_reps");
            if (!(level < 1.0) || n < std::ceil(1.0 / std::min(gamma, level))) {
                rec.flags.emplace_back("insufficient_samples");
                report.records.push_back(std::move(rec));
                continue;
            }
            const auto& sg = sorted[slot[label(t.g)]];

            if (t.kind == RiskTarget::Kind::VaR) {
                rec.empirical = empirical_var(sg, gamma);
                rec.std_error = empirical_var_stderr(sg, gamma);
            } else if (t.kind == RiskTarget::Kind::CoTE) {
                const double var = empirical_var(sg, gamma);
                const auto first = std::upper_bound(sg.begin(), sg.end(), var);
                const auto count = static_cast<double>(sg.end() - first);
                if (count == 0) {
                    rec.flags.emplace_back("empty_exceedances");
                } else {
                    long double s = 0.0L, s2 = 0.0L;
                    for (auto it = first; it != sg.end(); ++it) {
                        s += *it;
                        s2 += static_cast<long double>(*it) * *it;
                    }
                    const long double mean = s / count;
                    long double var_s = count > 1 ? (s2 - count * mean * mean) / (count - 1) : 0.0L;
                    if (var_s < 0) var_s = 0;
                    rec.empirical = static_cast<double>(mean);
                    rec.std_error = static_cast<double>(std::sqrt(var_s / count));
                }
            } else {
                const auto& rg = raw[slot[label(t.g)]];
                const auto& rh = raw[slot[label(*t.h)]];
                const double vg = empirical_var(sg, level);
                const double vh = empirical_var(sorted[slot[label(*t.h)]], gamma);
                std::uint64_t cond = 0, joint = 0;
                for (std::size_t r = 0; r < rh.size(); ++r) {
                    if (rh[r] > vh) {
                        ++cond;
                        if (rg[r] > vg) ++joint;
                    }
                }
                if (cond == 0) {
                    rec.flags.emplace_back("empty_exceedances");
                } else {
                    const double p = static_cast<double>(joint) / static_cast<double>(cond);
                    rec.empirical = p;
                    rec.std_error = std::sqrt(p * (1.0 - p) / static_cast<double>(cond));
                }
            }

            try {
                switch (t.kind) {
                    case RiskTarget::Kind::VaR:
                        rec.asymptotic = var_asymptotic(detail::asymptotic_constant(spec, t.g, method, constants),
                                                        spec.alpha, gamma);
                        break;
                    case RiskTarget::Kind::CoTE:
                        rec.asymptotic = cote_asymptotic(detail::asymptotic_constant(spec, t.g, method, constants),
                                                         spec.alpha, gamma);
                        break;
                    case RiskTarget::Kind::TailDep:
                        rec.asymptotic = tail_dep(spec, {t.g, *t.h}, t.kappa, method).value;
                        break;
                }
            } catch (const std::exception&) {
                rec.flags.emplace_back("no_asymptotic");
            }
            report.records.push_back(std::move(rec));
        }
    }
    return report;
}

struct UncoveredTailRecord {
    double t = 0.0;
    double scaled = 0.0;     // t^alpha P(sum_j 1(deg(j)=0) V_j > t), estimated
    double std_error = 0.0;
    double asymptotic = 0.0; // sum_l K_l P(deg(l) = 0)
};

/// Empirical t^alpha-scaled tail of the uncovered aggregate at each t.
inline std::vector<UncoveredTailRecord> simulate_uncovered(const MarketSpec& spec, std::span<const double> ts,
                                                           std::uint64_t reps, std::uint64_t seed,
                                                           unsigned workers = default_worker_count()) {
    require_valid(spec);
    if (reps == 0) throw ConfigError("reps must be at least 1");
    for (double t : ts)
        if (!(t > 0.0)) throw ConfigError("thresholds must be positive");
    const std::size_t n_blocks = static_cast<std::size_t>((reps + detail::kMonteCarloBlock - 1) / detail::kMonteCarloBlock);
    std::vector<std::vector<std::uint64_t>> counts(n_blocks, std::vector<std::uint64_t>(ts.size(), 0));
    for_each_block(n_blocks, workers, [&](std::size_t b) {
        AdjacencySample sample;
        std::vector<double> u, v;
        const std::uint64_t first = b * detail::kMonteCarloBlock;
        const std::uint64_t last = std::min<std::uint64_t>(reps, first + detail::kMonteCarloBlock);
        for (std::uint64_t r = first; r < last; ++r) {
            detail::sample_adjacency_into(spec, seed, graph_stream(r), sample);
            detail::sample_claims_into(spec, seed, claims_stream(r), u, v);
            double s = 0.0;
            for (std::size_t j = 0; j < spec.d; ++j)
                if (sample.column_degree(j) == 0) s += v[j];
            for (std::size_t k = 0; k < ts.size(); ++k)
                if (s > ts[k]) ++counts[b][k];
        }
    });
    const double c = uncovered(spec).constant;
    std::vector<UncoveredTailRecord> out;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        std::uint64_t hits = 0;
        for (const auto& blk : counts) hits += blk[k];
        const double p = static_cast<double>(hits) / static_cast<double>(reps);
        const double scale = std::pow(ts[k], spec.alpha);
        out.push_back({ts[k], p * scale, scale * std::sqrt(p * (1.0 - p) / static_cast<double>(reps)), c});
    }
    return out;
}

}  // namespace tailnet
