#pragma once

// Exact law of a sum of independent, non-identical Bernoulli variables.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tailnet/error.hpp"

namespace tailnet {

struct CountDistribution {
    std::vector<double> pmf;  // pmf[m] = P(N = m), m = 0..n

    std::size_t n() const noexcept { return pmf.empty() ? 0 : pmf.size() - 1; }

    double mean() const {
        long double s = 0.0L;
        for (std::size_t m = 0; m < pmf.size(); ++m) s += static_cast<long double>(m) * pmf[m];
        return static_cast<double>(s);
    }
};

/// Poisson-binomial PMF by iterated convolution in index order, O(n^2).
inline CountDistribution poisson_binomial(std::span<const double> probs) {
    for (std::size_t k = 0; k < probs.size(); ++k)
        if (!(probs[k] >= 0.0 && probs[k] <= 1.0))
            throw ConfigError("probability out of range at term " + std::to_string(k + 1));

    std::vector<long double> acc(probs.size() + 1, 0.0L);
    acc[0] = 1.0L;
    std::size_t len = 1;
    for (double p : probs) {
        const long double pl = p;
        const long double ql = 1.0L - pl;
        acc[len] = acc[len - 1] * pl;
        for (std::size_t m = len - 1; m > 0; --m) acc[m] = acc[m] * ql + acc[m - 1] * pl;
        acc[0] *= ql;
        ++len;
    }
    CountDistribution out;
    out.pmf.assign(acc.begin(), acc.end());
    return out;
}

/// E f(N) = sum_m pmf[m] f(m).
template <typename F>
double expect_count_fn(const CountDistribution& dist, F&& f) {
    long double s = 0.0L;
    for (std::size_t m = 0; m < dist.pmf.size(); ++m) {
        if (dist.pmf[m] == 0.0) continue;
        s += static_cast<long double>(dist.pmf[m]) * static_cast<long double>(f(m));
    }
    return static_cast<double>(s);
}

}  // namespace tailnet
