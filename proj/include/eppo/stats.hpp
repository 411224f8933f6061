#pragma once

#include <span>
#include <vector>

namespace eppo::stats {

double mean(std::span<const double> xs);
/// Linear interpolation between order statistics (R type 7). q in [0, 1].
double quantile(std::vector<double> xs, double q);
inline double median(std::vector<double> xs) { return quantile(std::move(xs), 0.5); }

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};
Quartiles quartiles(const std::vector<double>& xs);

/// Binomial standard error sqrt(rate (1 - rate) / n).
double binomial_stderr(double rate, std::size_t n);

struct RankTest {
  double u = 0.0;  // Mann-Whitney U of the first sample
  double z = 0.0;
  double p_value = 1.0;  // one-sided, H1: first sample stochastically larger
};

/// Mann-Whitney U test, normal approximation with tie and continuity
/// corrections.
RankTest mann_whitney_greater(std::span<const double> a, std::span<const double> b);

double normal_upper_tail(double z);

}  // namespace eppo::stats
