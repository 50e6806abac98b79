#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "tailnet/error.hpp"
#include "tailnet/norm.hpp"
#include "tailnet/rng.hpp"

namespace tailnet {

/// Dense row-major q x d matrix (agents by objects).
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    T& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const T> data() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = Grid<double>;

/// Reinsurance split: each claim is shared equally by the agents covering it,
/// A_ij = 1(i~j) / deg(j).
struct InsuranceEqualSplit {};

/// Investment split: agent i spreads capital C_i equally over its assets,
/// A_ij = C_i 1(i~j) / deg(i).
struct InvestmentEqualSplit {
    std::vector<double> capitals;
};

/// Fixed weights, A_ij = W_ij 1(i~j).
struct ExplicitConstant {
    Matrix weights;
};

using WeightRule = std::variant<InsuranceEqualSplit, InvestmentEqualSplit, ExplicitConstant>;

enum class Regime { AsymptoticallyIndependent, AsymptoticallyFullyDependent };

struct MarketSpec {
    std::size_t q = 0;  // agents
    std::size_t d = 0;  // objects
    Matrix edge_probs;  // q x d, independent Bernoulli edges
    WeightRule weight_rule = InsuranceEqualSplit{};
    double alpha = 1.0;
    std::vector<double> k_coeffs;  // Pareto scale K_j, length d
    Regime regime = Regime::AsymptoticallyIndependent;

    bool is_insurance() const noexcept { return std::holds_alternative<InsuranceEqualSplit>(weight_rule); }
    bool is_column_local() const noexcept { return !std::holds_alternative<InvestmentEqualSplit>(weight_rule); }
};

/// Homogeneous insurance market with a single edge probability and K_j = k.
inline MarketSpec homogeneous_market(std::size_t q, std::size_t d, double p, double alpha, double k = 1.0,
                                     Regime regime = Regime::AsymptoticallyIndependent) {
    MarketSpec spec;
    spec.q = q;
    spec.d = d;
    spec.edge_probs = Matrix(q, d, p);
    spec.alpha = alpha;
    spec.k_coeffs.assign(d, k);
    spec.regime = regime;
    return spec;
}

/// Every violated constraint, in a stable order. Empty means valid.
inline std::vector<std::string> validate(const MarketSpec& spec) {
    std::vector<std::string> errors;
    if (spec.q == 0) errors.emplace_back("number of agents must be positive");
    if (spec.d == 0) errors.emplace_back("number of objects must be positive");
    if (spec.edge_probs.rows() != spec.q || spec.edge_probs.cols() != spec.d) {
        errors.push_back("edge probability matrix is " + std::to_string(spec.edge_probs.rows()) + "x" +
                         std::to_string(spec.edge_probs.cols()) + ", expected " + std::to_string(spec.q) + "x" +
                         std::to_string(spec.d));
    } else {
        for (std::size_t i = 0; i < spec.q; ++i)
            for (std::size_t j = 0; j < spec.d; ++j) {
                const double p = spec.edge_probs(i, j);
                if (!(p >= 0.0 && p <= 1.0))
                    errors.push_back("probability out of range at (" + std::to_string(i + 1) + "," +
                                     std::to_string(j + 1) + ")");
            }
    }
    if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha)) errors.emplace_back("alpha must be positive");
    if (spec.k_coeffs.size() != spec.d) {
        errors.push_back("k_coeffs has length " + std::to_string(spec.k_coeffs.size()) + ", expected " +
                         std::to_string(spec.d));
    } else {
        for (std::size_t j = 0; j < spec.d; ++j)
            if (!(spec.k_coeffs[j] > 0.0) || !std::isfinite(spec.k_coeffs[j]))
                errors.push_back("K must be positive at object " + std::to_string(j + 1));
    }
    if (const auto* inv = std::get_if<InvestmentEqualSplit>(&spec.weight_rule)) {
        if (inv->capitals.size() != spec.q) {
            errors.push_back("capitals has length " + std::to_string(inv->capitals.size()) + ", expected " +
                             std::to_string(spec.q));
        } else {
            for (std::size_t i = 0; i < spec.q; ++i)
                if (!(inv->capitals[i] > 0.0) || !std::isfinite(inv->capitals[i]))
                    errors.push_back("capital must be positive at agent " + std::to_string(i + 1));
        }
    }
    if (const auto* ex = std::get_if<ExplicitConstant>(&spec.weight_rule)) {
        if (ex->weights.rows() != spec.q || ex->weights.cols() != spec.d) {
            errors.emplace_back("explicit weight matrix has wrong dimensions");
        } else {
            for (std::size_t i = 0; i < spec.q; ++i)
                for (std::size_t j = 0; j < spec.d; ++j)
                    if (!(ex->weights(i, j) > 0.0) || !std::isfinite(ex->weights(i, j)))
                        errors.push_back("weight must be positive at (" + std::to_string(i + 1) + "," +
                                         std::to_string(j + 1) + ")");
        }
    }
    return errors;
}

inline void require_valid(const MarketSpec& spec) {
    const auto errors = validate(spec);
    if (errors.empty()) return;
    std::string msg = "invalid market specification:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
}

struct AdjacencySample {
    Grid<std::uint8_t> indicators;
    Matrix weights;

    std::size_t column_degree(std::size_t j) const {
        std::size_t deg = 0;
        for (std::size_t i = 0; i < indicators.rows(); ++i) deg += indicators(i, j);
        return deg;
    }

    /// Copy of column j of the weighted adjacency matrix.
    std::vector<double> column(std::size_t j) const {
        std::vector<double> c(weights.rows());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = weights(i, j);
        return c;
    }
};

/// Applies the weight rule to a realized edge set (0/0 := 0), writing into
/// an existing q x d matrix.
inline void apply_weight_rule_into(const MarketSpec& spec, const Grid<std::uint8_t>& ind, Matrix& a) {
    if (a.rows() != spec.q || a.cols() != spec.d) a = Matrix(spec.q, spec.d, 0.0);
    std::visit(
        [&](const auto& rule) {
            using R = std::decay_t<decltype(rule)>;
            if constexpr (std::is_same_v<R, InsuranceEqualSplit>) {
                for (std::size_t j = 0; j < spec.d; ++j) {
                    std::size_t deg = 0;
                    for (std::size_t i = 0; i < spec.q; ++i) deg += ind(i, j);
                    const double share = deg == 0 ? 0.0 : 1.0 / static_cast<double>(deg);
                    for (std::size_t i = 0; i < spec.q; ++i) a(i, j) = ind(i, j) ? share : 0.0;
                }
            } else if constexpr (std::is_same_v<R, InvestmentEqualSplit>) {
                for (std::size_t i = 0; i < spec.q; ++i) {
                    std::size_t deg = 0;
                    for (std::size_t j = 0; j < spec.d; ++j) deg += ind(i, j);
                    const double share = deg == 0 ? 0.0 : rule.capitals[i] / static_cast<double>(deg);
                    for (std::size_t j = 0; j < spec.d; ++j) a(i, j) = ind(i, j) ? share : 0.0;
                }
            } else {
                for (std::size_t i = 0; i < spec.q; ++i)
                    for (std::size_t j = 0; j < spec.d; ++j) a(i, j) = ind(i, j) ? rule.weights(i, j) : 0.0;
            }
        },
        spec.weight_rule);
}

inline Matrix apply_weight_rule(const MarketSpec& spec, const Grid<std::uint8_t>& ind) {
    Matrix a(spec.q, spec.d, 0.0);
    apply_weight_rule_into(spec, ind, a);
    return a;
}

namespace detail {

// Unchecked sampler reusing `out`'s storage; callers validate once.
inline void sample_adjacency_into(const MarketSpec& spec, std::uint64_t seed, std::uint64_t stream,
                                  AdjacencySample& out) {
    const CounterStream rng(seed, stream);
    if (out.indicators.rows() != spec.q || out.indicators.cols() != spec.d)
        out.indicators = Grid<std::uint8_t>(spec.q, spec.d, 0);
    for (std::size_t j = 0; j < spec.d; ++j)
        for (std::size_t i = 0; i < spec.q; ++i)
            out.indicators(i, j) = rng.uniform(j * spec.q + i) < spec.edge_probs(i, j) ? 1 : 0;
    apply_weight_rule_into(spec, out.indicators, out.weights);
}

}  // namespace detail

/// Realized graph for `seed`. Edge (i,j) uses draw j*q + i of stream
/// `stream`, so each edge's value does not depend on traversal order.
inline AdjacencySample sample_adjacency(const MarketSpec& spec, std::uint64_t seed, std::uint64_t stream = 0) {
    require_valid(spec);
    AdjacencySample s;
    detail::sample_adjacency_into(spec, seed, stream, s);
    return s;
}

/// ||A e_j||_r^alpha for a realized sample; 0 for an empty column.
inline double column_norm_alpha(const AdjacencySample& sample, std::size_t j, const NormSpec& norm, double alpha) {
    const auto col = sample.column(j);
    return pow0(norm(col), alpha);
}

}  // namespace tailnet
