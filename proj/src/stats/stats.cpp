#include "helm/stats/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>

#include "helm/rng.hpp"

namespace helm::stats {

namespace {

void require_values(std::span<const double> values, const char* what)
{
    if (values.empty()) throw std::invalid_argument(std::string(what) + ": no values");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument(std::string(what) + ": non-finite value");
}

double sorted_iqm(const std::vector<double>& s)
{
    const double n = static_cast<double>(s.size());
    const double lo = n / 4.0, hi = 3.0 * n / 4.0;
    double total = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double a = std::max(lo, static_cast<double>(i));
        const double b = std::min(hi, static_cast<double>(i + 1));
        if (b > a) total += (b - a) * s[i];
    }
    return total / (hi - lo);
}

double quantile(const std::vector<double>& sorted, double q)
{
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    if (i + 1 >= sorted.size()) return sorted.back();
    const double f = pos - static_cast<double>(i);
    return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Ranked {
    std::vector<double> doubled;  // 2 * mid-rank, integral
    double tie_term = 0;          // sum over tie groups of t^3 - t
};

Ranked rank(std::span<const double> xs, std::span<const double> ys)
{
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < xs.size(); ++i) all.emplace_back(xs[i], i);
    for (std::size_t i = 0; i < ys.size(); ++i) all.emplace_back(ys[i], xs.size() + i);
    std::sort(all.begin(), all.end());
    Ranked r;
    r.doubled.assign(all.size(), 0.0);
    for (std::size_t i = 0; i < all.size();) {
        std::size_t j = i;
        while (j < all.size() && all[j].first == all[i].first) ++j;
        // ranks i+1 .. j share the mid-rank (i+1+j)/2
        const double doubled = static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k) r.doubled[all[k].second] = doubled;
        const double t = static_cast<double>(j - i);
        r.tie_term += t * t * t - t;
        i = j;
    }
    return r;
}

}  // namespace

double iqm(std::span<const double> values)
{
    require_values(values, "iqm");
    std::vector<double> s(values.begin(), values.end());
    std::sort(s.begin(), s.end());
    return sorted_iqm(s);
}

Interval bootstrap_ci(std::span<const double> values, int resamples, double level, std::uint64_t seed)
{
    require_values(values, "bootstrap_ci");
    if (resamples < 1) throw std::invalid_argument("bootstrap_ci: resamples must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("bootstrap_ci: level must be in (0, 1)");
    Rng rng(seed);
    const std::size_t n = values.size();
    std::vector<double> stats(static_cast<std::size_t>(resamples)), draw(n);
    for (auto& st : stats) {
        for (auto& d : draw) d = values[rng.below(n)];
        std::sort(draw.begin(), draw.end());
        st = sorted_iqm(draw);
    }
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile(stats, tail), quantile(stats, 1.0 - tail)};
}

namespace {

// counts[s]: subsets of `sample_size` items whose doubled rank sum is s.
// Integer counts keep tail probabilities to a single rounding.
std::vector<std::uint64_t> rank_sum_counts(std::span<const double> doubled_ranks, int sample_size)
{
    const auto n = static_cast<int>(doubled_ranks.size());
    if (sample_size < 0 || sample_size > n) throw std::invalid_argument("rank_sum_distribution: bad sample size");
    std::size_t max_sum = 0;
    for (double r : doubled_ranks) max_sum += static_cast<std::size_t>(std::lround(r));
    std::vector<std::vector<std::uint64_t>> counts(static_cast<std::size_t>(sample_size) + 1,
                                                   std::vector<std::uint64_t>(max_sum + 1, 0));
    counts[0][0] = 1;
    for (double r : doubled_ranks) {
        const auto w = static_cast<std::size_t>(std::lround(r));
        for (int k = sample_size; k >= 1; --k) {
            auto& dst = counts[static_cast<std::size_t>(k)];
            const auto& src = counts[static_cast<std::size_t>(k - 1)];
            for (std::size_t s = max_sum + 1; s-- > w;) dst[s] += src[s - w];
        }
    }
    return counts[static_cast<std::size_t>(sample_size)];
}

}  // namespace

std::vector<double> rank_sum_distribution(std::span<const double> doubled_ranks, int sample_size)
{
    const auto counts = rank_sum_counts(doubled_ranks, sample_size);
    const double total = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
    std::vector<double> p(counts.size());
    for (std::size_t s = 0; s < counts.size(); ++s) p[s] = static_cast<double>(counts[s]) / total;
    return p;
}

double wilcoxon_rank_sum_normal(std::span<const double> xs, std::span<const double> ys)
{
    require_values(xs, "wilcoxon");
    require_values(ys, "wilcoxon");
    const Ranked r = rank(xs, ys);
    const double n1 = static_cast<double>(xs.size()), n2 = static_cast<double>(ys.size()), n = n1 + n2;
    if (r.tie_term == n * n * n - n) return 0.5;
    double w = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) w += r.doubled[i] / 2.0;
    const double mu = n1 * (n + 1.0) / 2.0;
    const double var = n1 * n2 / 12.0 * ((n + 1.0) - r.tie_term / (n * (n - 1.0)));
    return 1.0 - normal_cdf((w - mu + 0.5) / std::sqrt(var));
}

double wilcoxon_rank_sum_greater(std::span<const double> xs, std::span<const double> ys, int exact_limit)
{
    require_values(xs, "wilcoxon");
    require_values(ys, "wilcoxon");
    const auto total = static_cast<int>(xs.size() + ys.size());
    if (total > exact_limit) return wilcoxon_rank_sum_normal(xs, ys);
    const Ranked r = rank(xs, ys);
    const double n = total;
    if (r.tie_term == n * n * n - n) return 0.5;
    long observed = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) observed += std::lround(r.doubled[i]);
    const auto counts = rank_sum_counts(r.doubled, static_cast<int>(xs.size()));
    std::uint64_t above = 0, all = 0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
        all += counts[s];
        if (s > static_cast<std::size_t>(observed)) above += counts[s];
    }
    return static_cast<double>(above) / static_cast<double>(all);
}

double normalized_return(double r, NormalizationRange range)
{
    if (!(range.max > range.min)) throw std::invalid_argument("normalized_return: range needs max > min");
    return (r - range.min) / (range.max - range.min);
}

double tail_mean(std::span<const double> values, std::size_t window)
{
    require_values(values, "tail_mean");
    const std::size_t k = std::min(window, values.size());
    return std::accumulate(values.end() - static_cast<long>(k), values.end(), 0.0) / static_cast<double>(k);
}

}  // namespace helm::stats
