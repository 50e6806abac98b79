#pragma once

// Expectations of functionals of the random weighted adjacency matrix, the
// computational core behind every constant. Three routes:
//
//   Exact        insurance rule only. A column functional that reads a few
//                named agents plus norms of the column depends on the column
//                only through those agents' edges and the degree, so it is an
//                expectation over a Poisson-binomial count.
//   Enumeration  sums over every edge configuration, per column (2^q) when
//                the weight rule is column-local, else over the whole graph
//                (2^(qd)).
//   MonteCarlo   averages over sampled graphs.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tailnet/count_dist.hpp"
#include "tailnet/error.hpp"
#include "tailnet/market.hpp"
#include "tailnet/norm.hpp"
#include "tailnet/parallel.hpp"

namespace tailnet {

struct Exact {};
struct Enumeration {};
struct MonteCarlo {
    std::uint64_t reps = 100000;
    std::uint64_t seed = 0;
};

using EvalMethod = std::variant<Exact, Enumeration, MonteCarlo>;

inline std::string method_name(const EvalMethod& m) {
    if (std::holds_alternative<Exact>(m)) return "exact";
    if (std::holds_alternative<Enumeration>(m)) return "enumeration";
    return "montecarlo";
}

/// Largest number of Bernoulli edges summed over by enumeration.
inline constexpr std::size_t kEnumerationCeilingBits = 22;

/// A value with its Monte Carlo standard error (zero for exact routes).
struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

/// phi(x) = combine(a_1(x), ..., a_n(x)) for aggregations a_k of a q-vector x
/// (a column A e_j, or the fully dependent exposure direction A K^{1/alpha} 1).
struct Functional {
    static constexpr std::size_t kMaxAggregations = 4;

    std::vector<Aggregation> aggs;
    std::function<double(std::span<const double>)> combine;

    double operator()(std::span<const double> x) const {
        std::array<double, kMaxAggregations> v{};
        for (std::size_t k = 0; k < aggs.size(); ++k) v[k] = evaluate(aggs[k], x);
        return combine(std::span<const double>(v.data(), aggs.size()));
    }

    /// Agents read through projections, sorted and unique.
    std::vector<std::size_t> named_agents() const {
        std::vector<std::size_t> out;
        for (const auto& a : aggs)
            if (const auto* p = std::get_if<Projection>(&a)) out.push_back(p->agent);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

namespace detail {

inline void check_functional_indices(const MarketSpec& spec, const Functional& f) {
    if (f.aggs.size() > Functional::kMaxAggregations) throw ConfigError("too many aggregations in functional");
    for (const auto& a : f.aggs)
        if (const auto* p = std::get_if<Projection>(&a))
            if (p->agent >= spec.q)
                throw ConfigError("agent index " + std::to_string(p->agent + 1) + " out of range 1.." +
                                  std::to_string(spec.q));
}

// Insurance rule, column j: sums over the edges of the named agents and the
// Poisson-binomial count of the remaining agents. Aggregations are evaluated
// from the degree alone: a named agent holds 1/deg, the r-norm is
// deg^(1/r - 1).
inline double exact_column(const MarketSpec& spec, std::size_t j, const Functional& f,
                           const std::vector<std::size_t>& named, const CountDistribution& rest) {
    const std::size_t s = named.size();
    std::array<double, Functional::kMaxAggregations> v{};
    long double total = 0.0L;
    for (std::uint32_t bits = 0; bits < (1u << s); ++bits) {
        long double pb = 1.0L;
        for (std::size_t t = 0; t < s; ++t) {
            const double p = spec.edge_probs(named[t], j);
            pb *= (bits >> t) & 1u ? p : 1.0 - p;
        }
        if (pb == 0.0L) continue;
        const auto named_deg = static_cast<std::size_t>(std::popcount(bits));
        long double inner = 0.0L;
        for (std::size_t m = 0; m < rest.pmf.size(); ++m) {
            const double pm = rest.pmf[m];
            if (pm == 0.0) continue;
            const std::size_t deg = named_deg + m;
            const double share = deg == 0 ? 0.0 : 1.0 / static_cast<double>(deg);
            for (std::size_t k = 0; k < f.aggs.size(); ++k) {
                if (const auto* p = std::get_if<Projection>(&f.aggs[k])) {
                    const auto pos = std::lower_bound(named.begin(), named.end(), p->agent) - named.begin();
                    v[k] = (bits >> pos) & 1u ? share : 0.0;
                } else {
                    const auto& norm = std::get<NormAggregation>(f.aggs[k]).norm;
                    v[k] = deg == 0 ? 0.0 : std::pow(static_cast<double>(deg), norm.share_exponent());
                }
            }
            inner += static_cast<long double>(pm) * f.combine(std::span<const double>(v.data(), f.aggs.size()));
        }
        total += pb * inner;
    }
    return static_cast<double>(total);
}

inline CountDistribution rest_distribution(const MarketSpec& spec, std::size_t j,
                                           const std::vector<std::size_t>& named) {
    std::vector<double> probs;
    probs.reserve(spec.q);
    for (std::size_t i = 0; i < spec.q; ++i)
        if (!std::binary_search(named.begin(), named.end(), i)) probs.push_back(spec.edge_probs(i, j));
    return poisson_binomial(probs);
}

inline void column_weights(const MarketSpec& spec, std::size_t j, std::uint64_t mask, std::vector<double>& col) {
    std::size_t deg = 0;
    for (std::size_t i = 0; i < spec.q; ++i) deg += (mask >> i) & 1u;
    if (spec.is_insurance()) {
        const double share = deg == 0 ? 0.0 : 1.0 / static_cast<double>(deg);
        for (std::size_t i = 0; i < spec.q; ++i) col[i] = (mask >> i) & 1u ? share : 0.0;
    } else {
        const auto& w = std::get<ExplicitConstant>(spec.weight_rule).weights;
        for (std::size_t i = 0; i < spec.q; ++i) col[i] = (mask >> i) & 1u ? w(i, j) : 0.0;
    }
}

// Column-local rule: all 2^q edge sets of column j.
inline std::vector<double> enumerate_column(const MarketSpec& spec, std::size_t j,
                                            std::span<const Functional> fs) {
    std::vector<long double> acc(fs.size(), 0.0L);
    std::vector<double> col(spec.q);
    const std::uint64_t n_masks = std::uint64_t{1} << spec.q;
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
        long double prob = 1.0L;
        for (std::size_t i = 0; i < spec.q && prob != 0.0L; ++i) {
            const double p = spec.edge_probs(i, j);
            prob *= (mask >> i) & 1u ? p : 1.0 - p;
        }
        if (prob == 0.0L) continue;
        column_weights(spec, j, mask, col);
        for (std::size_t k = 0; k < fs.size(); ++k) acc[k] += prob * fs[k](col);
    }
    return {acc.begin(), acc.end()};
}

// Visits every full graph with positive probability: visit(prob, A).
template <typename Visit>
void enumerate_graphs(const MarketSpec& spec, std::uint64_t first, std::uint64_t last, Visit&& visit) {
    const std::size_t n_bits = spec.q * spec.d;
    Grid<std::uint8_t> ind(spec.q, spec.d, 0);
    Matrix a(spec.q, spec.d, 0.0);
    for (std::uint64_t mask = first; mask < last; ++mask) {
        long double prob = 1.0L;
        for (std::size_t b = 0; b < n_bits && prob != 0.0L; ++b) {
            const std::size_t i = b % spec.q, j = b / spec.q;
            const bool on = (mask >> b) & 1u;
            ind(i, j) = on ? 1 : 0;
            const double p = spec.edge_probs(i, j);
            prob *= on ? p : 1.0 - p;
        }
        if (prob == 0.0L) continue;
        apply_weight_rule_into(spec, ind, a);
        visit(prob, a);
    }
}

inline void require_graph_enumerable(const MarketSpec& spec) {
    if (spec.q * spec.d > kEnumerationCeilingBits)
        throw InfeasibleError("enumeration ceiling exceeded: q*d = " + std::to_string(spec.q * spec.d) +
                              " edges > " + std::to_string(kEnumerationCeilingBits));
}

inline std::size_t graph_blocks(const MarketSpec& spec, std::uint64_t& block_size) {
    const std::uint64_t total = std::uint64_t{1} << (spec.q * spec.d);
    block_size = std::min<std::uint64_t>(total, 1u << 12);
    return static_cast<std::size_t>(total / block_size);
}

// Fixed-size blocks of Monte Carlo replications, reduced in block order.
inline constexpr std::uint64_t kMonteCarloBlock = 1u << 12;

struct MomentSums {
    std::vector<long double> sum;
    std::vector<long double> sum_sq;
};

template <typename PerRep>
std::vector<Estimate> monte_carlo_mean(std::size_t n_out, const MonteCarlo& mc, unsigned workers, PerRep&& per_rep) {
    if (mc.reps == 0) throw ConfigError("Monte Carlo reps must be at least 1");
    const std::size_t n_blocks = static_cast<std::size_t>((mc.reps + kMonteCarloBlock - 1) / kMonteCarloBlock);
    std::vector<MomentSums> blocks(n_blocks);
    for_each_block(n_blocks, workers, [&](std::size_t b) {
        MomentSums m{std::vector<long double>(n_out, 0.0L), std::vector<long double>(n_out, 0.0L)};
        std::vector<double> y(n_out);
        const std::uint64_t first = b * kMonteCarloBlock;
        const std::uint64_t last = std::min<std::uint64_t>(mc.reps, first + kMonteCarloBlock);
        for (std::uint64_t r = first; r < last; ++r) {
            per_rep(r, y);
            for (std::size_t k = 0; k < n_out; ++k) {
                m.sum[k] += y[k];
                m.sum_sq[k] += static_cast<long double>(y[k]) * y[k];
            }
        }
        blocks[b] = std::move(m);
    });
    std::vector<long double> s(n_out, 0.0L), s2(n_out, 0.0L);
    for (const auto& m : blocks)
        for (std::size_t k = 0; k < n_out; ++k) {
            s[k] += m.sum[k];
            s2[k] += m.sum_sq[k];
        }
    std::vector<Estimate> out(n_out);
    const auto n = static_cast<long double>(mc.reps);
    for (std::size_t k = 0; k < n_out; ++k) {
        const long double mean = s[k] / n;
        long double var = n > 1 ? (s2[k] - n * mean * mean) / (n - 1) : 0.0L;
        if (var < 0) var = 0;
        out[k] = {static_cast<double>(mean), static_cast<double>(std::sqrt(var / n))};
    }
    return out;
}

}  // namespace detail

/// Graph stream used by Monte Carlo replication `rep` (shared by every
/// Monte Carlo route so estimates made with one seed use the same graphs).
inline std::uint64_t graph_stream(std::uint64_t rep) { return 2 * rep; }

/// E phi(A e_j) for one column, exactly (insurance rule only).
inline double exact_column_expectation(const MarketSpec& spec, std::size_t j, const Functional& f) {
    if (!spec.is_insurance()) throw InfeasibleError("exact path requires the insurance weight rule");
    detail::check_functional_indices(spec, f);
    const auto named = f.named_agents();
    return detail::exact_column(spec, j, f, named, detail::rest_distribution(spec, j, named));
}

/// sum_j K_j E phi_k(A e_j) for each functional phi_k.
inline std::vector<Estimate> column_sums(const MarketSpec& spec, std::span<const Functional> fs,
                                         const EvalMethod& method, unsigned workers = default_worker_count()) {
    require_valid(spec);
    for (const auto& f : fs) detail::check_functional_indices(spec, f);
    std::vector<Estimate> out(fs.size());

    if (std::holds_alternative<Exact>(method)) {
        if (!spec.is_insurance()) throw InfeasibleError("exact path requires the insurance weight rule");
        std::vector<long double> acc(fs.size(), 0.0L);
        for (std::size_t j = 0; j < spec.d; ++j) {
            std::map<std::vector<std::size_t>, CountDistribution> rest_cache;
            for (std::size_t k = 0; k < fs.size(); ++k) {
                const auto named = fs[k].named_agents();
                auto it = rest_cache.find(named);
                if (it == rest_cache.end())
                    it = rest_cache.emplace(named, detail::rest_distribution(spec, j, named)).first;
                acc[k] += static_cast<long double>(spec.k_coeffs[j]) *
                          detail::exact_column(spec, j, fs[k], named, it->second);
            }
        }
        for (std::size_t k = 0; k < fs.size(); ++k) out[k].value = static_cast<double>(acc[k]);
        return out;
    }

    if (std::holds_alternative<Enumeration>(method)) {
        if (spec.is_column_local()) {
            if (spec.q > kEnumerationCeilingBits)
                throw InfeasibleError("enumeration ceiling exceeded: 2^" + std::to_string(spec.q) +
                                      " configurations per column");
            std::vector<long double> acc(fs.size(), 0.0L);
            for (std::size_t j = 0; j < spec.d; ++j) {
                const auto col = detail::enumerate_column(spec, j, fs);
                for (std::size_t k = 0; k < fs.size(); ++k)
                    acc[k] += static_cast<long double>(spec.k_coeffs[j]) * col[k];
            }
            for (std::size_t k = 0; k < fs.size(); ++k) out[k].value = static_cast<double>(acc[k]);
            return out;
        }
        // Row-coupled weights: columns are no longer independent functions of
        // their own edges, so enumerate whole graphs.
        detail::require_graph_enumerable(spec);
        std::uint64_t block_size = 0;
        const std::size_t n_blocks = detail::graph_blocks(spec, block_size);
        std::vector<std::vector<long double>> partial(n_blocks);
        for_each_block(n_blocks, workers, [&](std::size_t b) {
            std::vector<long double> acc(fs.size(), 0.0L);
            std::vector<double> col(spec.q);
            detail::enumerate_graphs(spec, b * block_size, (b + 1) * block_size, [&](long double prob, const Matrix& a) {
                for (std::size_t j = 0; j < spec.d; ++j) {
                    for (std::size_t i = 0; i < spec.q; ++i) col[i] = a(i, j);
                    for (std::size_t k = 0; k < fs.size(); ++k) acc[k] += prob * spec.k_coeffs[j] * fs[k](col);
                }
            });
            partial[b] = std::move(acc);
        });
        for (std::size_t k = 0; k < fs.size(); ++k) {
            long double s = 0.0L;
            for (const auto& p : partial) s += p[k];
            out[k].value = static_cast<double>(s);
        }
        return out;
    }

    const auto& mc = std::get<MonteCarlo>(method);
    return detail::monte_carlo_mean(fs.size(), mc, workers, [&](std::uint64_t r, std::vector<double>& y) {
        thread_local AdjacencySample sample;
        thread_local std::vector<double> col;
        detail::sample_adjacency_into(spec, mc.seed, graph_stream(r), sample);
        col.resize(spec.q);
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t j = 0; j < spec.d; ++j) {
            for (std::size_t i = 0; i < spec.q; ++i) col[i] = sample.weights(i, j);
            for (std::size_t k = 0; k < fs.size(); ++k) y[k] += spec.k_coeffs[j] * fs[k](col);
        }
    });
}

/// x = A K^{1/alpha} 1, the exposure direction under fully dependent claims.
inline void dependent_direction(const MarketSpec& spec, const Matrix& a, std::vector<double>& x) {
    x.assign(spec.q, 0.0);
    for (std::size_t j = 0; j < spec.d; ++j) {
        const double kj = std::pow(spec.k_coeffs[j], 1.0 / spec.alpha);
        for (std::size_t i = 0; i < spec.q; ++i) x[i] += a(i, j) * kj;
    }
}

/// E psi_k(A K^{1/alpha} 1) for each functional psi_k. The expectation
/// couples all columns, so only Enumeration and MonteCarlo apply.
inline std::vector<Estimate> direction_expectations(const MarketSpec& spec, std::span<const Functional> fs,
                                                    const EvalMethod& method,
                                                    unsigned workers = default_worker_count()) {
    require_valid(spec);
    for (const auto& f : fs) detail::check_functional_indices(spec, f);
    if (std::holds_alternative<Exact>(method))
        throw InfeasibleError("no exact path for fully dependent constants; use enumeration or montecarlo");

    if (std::holds_alternative<Enumeration>(method)) {
        detail::require_graph_enumerable(spec);
        std::uint64_t block_size = 0;
        const std::size_t n_blocks = detail::graph_blocks(spec, block_size);
        std::vector<std::vector<long double>> partial(n_blocks);
        for_each_block(n_blocks, workers, [&](std::size_t b) {
            std::vector<long double> acc(fs.size(), 0.0L);
            std::vector<double> x;
            detail::enumerate_graphs(spec, b * block_size, (b + 1) * block_size, [&](long double prob, const Matrix& a) {
                dependent_direction(spec, a, x);
                for (std::size_t k = 0; k < fs.size(); ++k) acc[k] += prob * fs[k](x);
            });
            partial[b] = std::move(acc);
        });
        std::vector<Estimate> out(fs.size());
        for (std::size_t k = 0; k < fs.size(); ++k) {
            long double s = 0.0L;
            for (const auto& p : partial) s += p[k];
            out[k].value = static_cast<double>(s);
        }
        return out;
    }

    const auto& mc = std::get<MonteCarlo>(method);
    return detail::monte_carlo_mean(fs.size(), mc, workers, [&](std::uint64_t r, std::vector<double>& y) {
        thread_local AdjacencySample sample;
        thread_local std::vector<double> x;
        detail::sample_adjacency_into(spec, mc.seed, graph_stream(r), sample);
        dependent_direction(spec, sample.weights, x);
        for (std::size_t k = 0; k < fs.size(); ++k) y[k] = fs[k](x);
    });
}

/// Dispatches on the market's regime: column sums when claims are
/// asymptotically independent, direction expectations when fully dependent.
inline std::vector<Estimate> regime_expectations(const MarketSpec& spec, std::span<const Functional> fs,
                                                 const EvalMethod& method,
                                                 unsigned workers = default_worker_count()) {
    if (spec.regime == Regime::AsymptoticallyIndependent) return column_sums(spec, fs, method, workers);
    return direction_expectations(spec, fs, method, workers);
}

}  // namespace tailnet
