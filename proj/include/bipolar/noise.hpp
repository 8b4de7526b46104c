#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/rng.hpp"

namespace bipolar {

/// Finite mark space {z_1, ..., z_K} with jump rates nu_j > 0.
struct MarkSpace {
  std::vector<double> rates;

  explicit MarkSpace(std::vector<double> r = {});
  std::size_t size() const { return rates.size(); }
  double total_rate() const;
};

struct JumpEvent {
  double t = 0;
  std::size_t mark = 0;
  friend bool operator==(const JumpEvent&, const JumpEvent&) = default;
};

/// Exact simulation of the Poisson random measure on [0, horizon]:
/// exponential inter-arrival times with rate Lambda and categorical marks with
/// probabilities nu_j / Lambda.
std::vector<JumpEvent> sample_jumps(const MarkSpace& marks, double horizon, Stream& stream);

/// Jumps with t0 < t <= t1 from a time-sorted list.
std::pair<std::size_t, std::size_t> jumps_in_window(const std::vector<JumpEvent>& jumps, double t0, double t1);

enum class NoiseKind { Zero, Linear, Additive, Affine, Saturating };
enum class ForcingLayout { Common, Modal };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& s);
std::string to_string(ForcingLayout layout);
ForcingLayout forcing_layout_from_string(const std::string& s);

/// Constants of the growth, Lipschitz and fourth-moment bounds
///   sum_j nu_j |sigma(t,u,z_j)|^2            <= l0 + l1 |u|^2
///   sum_j nu_j |sigma(t,u,z_j)-sigma(t,v,z_j)|^2 <= l2 |u - v|^2
///   sum_j nu_j |sigma(t,u,z_j)|^4            <= l3 (1 + |u|^4)
struct NoiseConstants {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  friend bool operator==(const NoiseConstants&, const NoiseConstants&) = default;
};

/// Level-independent description of the noise coefficient
///   sigma(t, u, z_j) = g_j h_j + a_j psi(u),
/// with psi(u) = u (linear, affine) or u / sqrt(1 + |u|^2) (saturating).
/// The forcing directions h_j have coefficients
///   (h_j)_i = (lambda_1 / lambda_i)^decay
/// on modes i < forcing_modes (common layout: the same h for every mark), or
/// only on mode j mod forcing_modes (modal layout).
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Zero;
  std::vector<double> rates;
  std::vector<double> jump_sizes;   // g_j
  std::vector<double> multipliers;  // a_j
  ForcingLayout layout = ForcingLayout::Common;
  std::size_t forcing_modes = 1;
  double decay = 0.0;

  MarkSpace marks() const { return MarkSpace(rates); }
  /// Throws std::invalid_argument on inconsistent sizes or values.
  void validate() const;
  /// Sharp or safe closed-form constants for the catalogue entry, computed
  /// with the untruncated forcing directions in dimension d.
  NoiseConstants closed_form_constants(int d) const;
  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// The noise coefficient restricted to H_m. Projection of the untruncated
/// directions, so sigma at level m is Pi_m sigma.
class NoiseCoefficient {
 public:
  NoiseCoefficient() = default;
  NoiseCoefficient(const NoiseSpec& spec, const GalerkinBasis& basis);

  std::size_t level() const { return level_; }
  std::size_t marks() const { return rates_.size(); }
  const std::vector<double>& rates() const { return rates_; }
  NoiseKind kind() const { return kind_; }
  bool is_zero() const { return kind_ == NoiseKind::Zero; }

  SpectralField sigma(double t, const SpectralField& u, std::size_t mark) const;
  /// sum_j nu_j sigma(t, u, z_j).
  SpectralField compensator(double t, const SpectralField& u) const;
  /// sum_j nu_j |sigma(t, u, z_j)|^2.
  double intensity(double t, const SpectralField& u) const;
  /// The direction h_j projected to this level.
  SpectralField direction(std::size_t mark) const;

 private:
  SpectralField state_part(const SpectralField& u) const;

  NoiseKind kind_ = NoiseKind::Zero;
  std::size_t level_ = 0;
  std::vector<double> rates_;
  std::vector<double> g_;
  std::vector<double> a_;
  Eigen::MatrixXd directions_;   // m x K
  Eigen::VectorXd mean_forcing_; // sum_j nu_j g_j h_j
  double mean_multiplier_ = 0;   // sum_j nu_j a_j
};

/// sum_{jumps} sigma(t_j, u, z_j) - (t1 - t0) sum_j nu_j sigma(t0, u, z_j),
/// with sigma frozen at the pre-step state u. Requires t0 < t1.
SpectralField compensated_increment(const NoiseCoefficient& sigma, const SpectralField& u, double t0, double t1,
                                    const std::vector<JumpEvent>& jumps);

struct SigmaWitness {
  std::string inequality;  // "growth", "lipschitz" or "fourth_moment"
  double t = 0;
  SpectralField u;
  SpectralField v;
  double lhs = 0, rhs = 0;
};

struct SigmaCertificate {
  NoiseConstants measured;
  NoiseConstants declared;
  std::size_t samples = 0;
  bool pass = false;
  std::optional<SigmaWitness> witness;
};

/// Randomized check of the three bounds over |u|, |v| <= radius and
/// t in [0, t_max]. Measured constants are the smallest ones consistent with
/// the samples: l0 = S(0), l1 = sup (S(u) - declared l0)^+ / |u|^2, and the
/// plain suprema of the Lipschitz and fourth-moment ratios.
SigmaCertificate validate_sigma(const NoiseCoefficient& sigma, const NoiseConstants& declared,
                                std::size_t sample_count, double radius, double t_max, std::uint64_t seed);

/// One JSON object per line: {"t":..,"mark":..,"pre_norm":..}.
void write_jump_log(std::ostream& os, const std::vector<JumpEvent>& jumps, const std::vector<double>& pre_norms);

}  // namespace bipolar
