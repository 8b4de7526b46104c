#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bipolar {

/// splitmix64 finalizer; a bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Stream purposes. A trajectory's streams are keyed by (root, purpose, index)
/// so that ensemble members can be generated in any order.
enum class StreamPurpose : std::uint64_t {
  Jumps = 1,
  Initial = 2,
  Inner = 3,
  Bootstrap = 4,
  Sampling = 5,
};

/// Key schedule: seed = mix64(mix64(mix64(root) ^ purpose) ^ index).
constexpr std::uint64_t derive_seed(std::uint64_t root, StreamPurpose purpose, std::uint64_t index) {
  return mix64(mix64(mix64(root) ^ static_cast<std::uint64_t>(purpose)) ^ index);
}

/// A random stream owned by one consumer. The engine is std::mt19937_64,
/// whose output sequence is fixed by the standard; the conversions below are
/// written out so draws are identical across standard library vendors.
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  Stream(std::uint64_t root, StreamPurpose purpose, std::uint64_t index)
      : engine_(derive_seed(root, purpose, index)) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Exponential with the given rate, by inversion.
  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }
  /// Standard normal by the Box-Muller transform (one draw per call).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bipolar
