#pragma once

// Evaluation statistics: interquartile mean, percentile bootstrap intervals,
// the one-sided Wilcoxon rank-sum test and min-max return normalization.

#include <cstdint>
#include <span>
#include <vector>

namespace helm::stats {

/// Mean of the middle 50% of the sorted values. Order statistic i covers
/// [i, i+1) and is weighted by its overlap with [n/4, 3n/4], so n not
/// divisible by 4 trims the boundary values fractionally.
double iqm(std::span<const double> values);

struct Interval {
    double lo = 0;
    double hi = 0;
};

/// Percentile bootstrap of the IQM: `resamples` draws with replacement,
/// quantiles by linear interpolation between order statistics.
Interval bootstrap_ci(std::span<const double> values, int resamples = 2000, double level = 0.95,
                      std::uint64_t seed = 0);

/// One-sided rank-sum test of "xs stochastically greater than ys", with
/// mid-ranks for ties. Returns P(W > w) for the rank sum W of xs under the
/// null, exactly when the combined size is at most `exact_limit`, otherwise
/// by the normal approximation with tie-corrected variance and continuity
/// correction. If every value is identical the test is uninformative and
/// 0.5 is returned.
double wilcoxon_rank_sum_greater(std::span<const double> xs, std::span<const double> ys, int exact_limit = 20);

/// The same statistic through the normal approximation regardless of size.
double wilcoxon_rank_sum_normal(std::span<const double> xs, std::span<const double> ys);

/// Exact null distribution of the doubled rank sum: probability of each
/// value 2W, indexed from 0. Exposed for tests.
std::vector<double> rank_sum_distribution(std::span<const double> doubled_ranks, int sample_size);

struct NormalizationRange {
    double min = 0;
    double max = 1;
};

/// (r - min) / (max - min); throws std::invalid_argument unless max > min.
double normalized_return(double r, NormalizationRange range);

/// Mean of the last `window` values (all of them if fewer).
double tail_mean(std::span<const double> values, std::size_t window = 100);

}  // namespace helm::stats
