#pragma once

#include <cstddef>
#include <vector>

namespace helm::testing {

// A_t = sum_l (gamma lambda)^l delta_{t+l}, stopping after a done.
inline double oracle_advantage(const std::vector<double>& r, const std::vector<double>& v, const std::vector<char>& d,
                               double bootstrap, double gamma, double lambda, std::size_t t)
{
    double total = 0.0, weight = 1.0;
    for (std::size_t k = t; k < r.size(); ++k) {
        const double next = k + 1 < r.size() ? v[k + 1] : bootstrap;
        const double delta = r[k] + (d[k] ? 0.0 : gamma * next) - v[k];
        total += weight * delta;
        if (d[k]) break;
        weight *= gamma * lambda;
    }
    return total;
}

// P(W > w) by listing every way to choose which pooled items belong to xs.
inline double enumerated_p(const std::vector<double>& xs, const std::vector<double>& ys)
{
    std::vector<double> pooled = xs;
    pooled.insert(pooled.end(), ys.begin(), ys.end());
    const std::size_t n = pooled.size(), k = xs.size();
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        double below = 0, equal = 0;
        for (double v : pooled) {
            below += v < pooled[i];
            equal += v == pooled[i];
        }
        ranks[i] = below + (equal + 1) / 2.0;
    }
    double observed = 0;
    for (std::size_t i = 0; i < k; ++i) observed += ranks[i];
    long greater = 0, total = 0;
    for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        if (static_cast<std::size_t>(__builtin_popcountl(mask)) != k) continue;
        double w = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1ul << i)) w += ranks[i];
        ++total;
        greater += w > observed + 1e-9;
    }
    return static_cast<double>(greater) / static_cast<double>(total);
}

}  // namespace helm::testing
