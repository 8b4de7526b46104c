#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <thread>
#include <type_traits>
#include <vector>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/rng.hpp"

namespace bipolar {

/// Worker count from BIPOLAR_WORKERS, or 1 when unset or invalid.
std::size_t default_workers();

/// Calls fn(i) for i in [0, n) on up to `workers` threads and returns the
/// results in index order. Results never depend on the worker count as long
/// as fn(i) depends only on i. If any call throws, the exception of the
/// smallest failing index is rethrown after all threads have joined.
template <class Fn>
auto run_indexed(std::size_t n, std::size_t workers, Fn&& fn) -> std::vector<std::invoke_result_t<Fn&, std::size_t>> {
  using R = std::invoke_result_t<Fn&, std::size_t>;
  std::vector<R> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

/// Law of the initial condition of an ensemble member.
class InitialLaw {
 public:
  enum class Kind { Fixed, Gaussian };

  InitialLaw() = default;
  static InitialLaw fixed(SpectralField point);
  /// Independent centred normals on the first `modes` coefficients with
  /// standard deviation scale * (lambda_1 / lambda_i)^decay.
  static InitialLaw gaussian(int dim, std::size_t modes, double scale, double decay = 0.0);

  Kind kind() const { return kind_; }
  /// Member `path` at `level`: the level-independent draw, projected or
  /// zero-padded, so levels see nested prefixes of one initial condition.
  SpectralField draw(std::size_t level, std::uint64_t root, std::size_t path) const;

  const SpectralField& point() const { return point_; }
  double scale() const { return scale_; }
  std::size_t modes() const { return profile_.size(); }
  double decay() const { return decay_; }

 private:
  Kind kind_ = Kind::Fixed;
  SpectralField point_;
  std::vector<double> profile_;
  double scale_ = 0, decay_ = 0;
};

struct EnsembleSpec {
  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  InitialLaw initial;
  std::size_t workers = 1;

  /// Throws std::invalid_argument when paths < 2.
  void validate() const;
};

/// Seed of the jump realization of member `path`.
inline std::uint64_t path_seed(std::uint64_t root, std::size_t path) {
  return derive_seed(root, StreamPurpose::Jumps, path);
}

}  // namespace bipolar
