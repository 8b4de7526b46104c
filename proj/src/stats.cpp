#include "bipolar/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "bipolar/rng.hpp"

namespace bipolar {

Estimate estimate(std::span<const double> values) {
  Estimate e;
  e.n = values.size();
  if (values.empty()) return e;
  double sum = 0;
  for (double v : values) sum += v;
  e.mean = sum / static_cast<double>(e.n);
  if (e.n < 2) return e;
  double ss = 0;
  for (double v : values) ss += (v - e.mean) * (v - e.mean);
  e.error = std::sqrt(ss / static_cast<double>(e.n - 1) / static_cast<double>(e.n));
  return e;
}

Interval bootstrap_interval(std::span<const double> values, std::uint64_t seed, std::size_t resamples,
                            double level) {
  if (values.empty()) return {};
  if (!(level > 0 && level < 1)) throw std::invalid_argument("bootstrap level must lie in (0, 1)");
  Stream rng(seed);
  const std::size_t n = values.size();
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += values[rng.next() % n];
    m = s / static_cast<double>(n);
  }
  std::sort(means.begin(), means.end());
  const double tail = (1 - level) / 2;
  const auto at = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(resamples - 1)));
    return means[std::min(k, resamples - 1)];
  };
  return {at(tail), at(1 - tail)};
}

double block_bootstrap_error(std::span<const double> block_means, std::span<const double> block_weights,
                             std::uint64_t seed, std::size_t resamples) {
  if (block_means.size() != block_weights.size()) throw std::invalid_argument("block means and weights differ in size");
  const std::size_t k = block_means.size();
  if (k < 2) return std::numeric_limits<double>::infinity();
  Stream rng(seed);
  double s1 = 0, s2 = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = rng.next() % k;
      num += block_means[j] * block_weights[j];
      den += block_weights[j];
    }
    const double m = den > 0 ? num / den : 0;
    s1 += m;
    s2 += m * m;
  }
  const double mean = s1 / static_cast<double>(resamples);
  const double var = std::max(0.0, s2 / static_cast<double>(resamples) - mean * mean);
  return std::sqrt(var * static_cast<double>(resamples) / static_cast<double>(resamples - 1));
}

TrendTest trend_test(std::span<const double> x, std::span<const Estimate> y, double z) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("trend test needs at least two matched points");
  const bool exact = std::all_of(y.begin(), y.end(), [](const Estimate& e) { return e.error == 0; });
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = exact ? 1.0 : 1.0 / std::max(y[i].error * y[i].error, 1e-300);
    sw += w;
    sx += w * x[i];
    sy += w * y[i].mean;
    sxx += w * x[i] * x[i];
    sxy += w * x[i] * y[i].mean;
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0)) throw std::invalid_argument("trend test needs distinct abscissae");
  TrendTest t;
  t.slope = (sw * sxy - sx * sy) / det;
  t.slope_error = exact ? 0.0 : std::sqrt(sw / det);
  const double scale = std::max(std::abs(sy / sw), 1.0);
  t.increasing = exact ? t.slope > 1e-12 * scale : t.slope > z * t.slope_error;
  return t;
}

bool intervals_overlap(std::span<const Estimate> values, double z) {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  for (const auto& e : values) {
    lo = std::max(lo, e.lower(z));
    hi = std::min(hi, e.upper(z));
  }
  return lo <= hi;
}

}  // namespace bipolar
