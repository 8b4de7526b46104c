#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bipolar {

/// Sample mean with its standard error sd / sqrt(n).
struct Estimate {
  double mean = 0;
  double error = 0;
  std::size_t n = 0;

  double lower(double z) const { return mean - z * error; }
  double upper(double z) const { return mean + z * error; }
};

Estimate estimate(std::span<const double> values);

struct Interval {
  double lo = 0, hi = 0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Percentile bootstrap interval for the mean.
Interval bootstrap_interval(std::span<const double> values, std::uint64_t seed, std::size_t resamples = 1000,
                            double level = 0.95);

/// Standard error of the mean of `block_means` by resampling whole blocks.
/// Weights are the block lengths (in time), so partial blocks count less.
double block_bootstrap_error(std::span<const double> block_means, std::span<const double> block_weights,
                             std::uint64_t seed, std::size_t resamples = 500);

/// Weighted least-squares slope of y against x with weights 1 / error^2.
/// `increasing` is the one-sided test slope > z * slope_error.
struct TrendTest {
  double slope = 0;
  double slope_error = 0;
  bool increasing = false;
};

TrendTest trend_test(std::span<const double> x, std::span<const Estimate> y, double z = 1.6448536269514722);

/// True when the intervals [mean - z err, mean + z err] share a point.
bool intervals_overlap(std::span<const Estimate> values, double z);

}  // namespace bipolar
