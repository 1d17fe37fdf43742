#pragma once

#include <span>
#include <vector>

namespace qsat::stats {

double mean(std::span<const double> values);
/// Population variance (divide by n).
double population_variance(std::span<const double> values);
double sample_std(std::span<const double> values);

/// Percentile by linear interpolation between closest ranks, p in [0, 1]:
/// h = (n - 1) p, result = x[floor h] + (h - floor h) (x[ceil h] - x[floor h]).
double percentile_sorted(std::span<const double> sorted, double p);
double percentile(std::vector<double> values, double p);

/// Moment skewness m3 / m2^1.5; 0 for a constant sample.
double skewness(std::span<const double> values);
/// Excess kurtosis m4 / m2^2 - 3; 0 for a constant sample.
double excess_kurtosis(std::span<const double> values);

/// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

double normal_quantile(double p);

}  // namespace qsat::stats
