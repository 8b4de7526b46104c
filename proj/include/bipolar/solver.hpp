#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bipolar/basis.hpp"
#include "bipolar/field.hpp"
#include "bipolar/noise.hpp"
#include "bipolar/operators.hpp"

namespace bipolar {

enum class Scheme { SemiImplicit, Explicit };
enum class JumpHandling { Grid, JumpAdapted };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);
std::string to_string(JumpHandling j);
JumpHandling jump_handling_from_string(const std::string& s);

struct SolverConfig {
  FluidParams fluid;
  std::size_t m = 16;
  double dt = 1e-3;
  double horizon = 1.0;
  Scheme scheme = Scheme::SemiImplicit;
  JumpHandling jumps = JumpHandling::Grid;
  /// Switches for cross-checks against the linear problem.
  bool stress = true;
  bool convection = true;

  /// Throws std::invalid_argument unless dt > 0, horizon >= dt (or
  /// horizon == 0) and m >= 1.
  void validate() const;
};

/// Default step min(1e-3, 0.1 / (lambda_m kappa1)).
double default_time_step(const GalerkinBasis& basis, double kappa1);

/// Everything that defines the Galerkin system at one level: basis,
/// operators and the projected noise. Immutable after construction and
/// shared by all trajectories of an ensemble.
class GalerkinModel {
 public:
  GalerkinModel(int d, std::size_t m, const FluidParams& fluid, const NoiseSpec& noise, int oversampling = 4);

  const GalerkinBasis& basis() const { return basis_; }
  const StressOperator& stress() const { return stress_; }
  const ConvectionOperator& convection() const { return convection_; }
  const NoiseCoefficient& noise() const { return noise_; }
  const NoiseSpec& noise_spec() const { return noise_spec_; }
  const FluidParams& fluid() const { return fluid_; }
  std::size_t level() const { return basis_.size(); }

 private:
  GalerkinBasis basis_;
  FluidParams fluid_;
  NoiseSpec noise_spec_;
  StressOperator stress_;
  ConvectionOperator convection_;
  NoiseCoefficient noise_;
};

/// Per-step terms of the discrete energy identity. For the semi-implicit step
/// x = (I + dt kappa1 A)^{-1}(u + y), y = -dt (2 kappa0 A_p u + B(u,u)) + dM:
///   |x|^2 = |u|^2 - dissipation - implicit_residual - 2 stress_work
///           - 2 dt convection_work + martingale + increment_sq
/// The explicit scheme satisfies the same identity with dissipation taken at
/// u and implicit_residual = 0. Jump rows (jump-adapted handling) have dt = 0.
struct LedgerRow {
  double t = 0;                  // end of the step
  double dt = 0;
  double energy = 0;             // |x|^2
  double dissipation = 0;        // 2 kappa1 ||x||_2^2 dt
  double implicit_residual = 0;  // dt^2 kappa1^2 |A x|^2
  double stress_work = 0;        // 2 kappa0 <A_p u, u> dt
  double convection_work = 0;    // <B(u,u), u>
  double martingale = 0;         // 2 (dM, u)
  double increment_sq = 0;       // |x - u|^2 for explicit, |y|^2 for semi-implicit
  double jump_qv = 0;            // sum over jumps of |sigma(u, z)|^2
  std::size_t jumps = 0;
  double h2_sq = 0;              // ||x||_2^2
  double h2_sq_pre = 0;          // ||u||_2^2
};

struct EnergyLedger {
  double initial_energy = 0;
  std::vector<LedgerRow> rows;
  /// |u(T)|^2 rebuilt from the initial energy and the row increments.
  double replayed_energy() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<SpectralField> states;
  std::vector<JumpEvent> jumps;
  EnergyLedger ledger;
};

class BlowUpError : public std::runtime_error {
 public:
  BlowUpError(std::size_t step, double t, double l2, double h2);
  std::size_t step() const { return step_; }
  double time() const { return t_; }
  double l2() const { return l2_; }
  double h2() const { return h2_; }

 private:
  std::size_t step_;
  double t_, l2_, h2_;
};

struct StepOutput {
  SpectralField next;
  LedgerRow row;
};

/// One drift step on [t, t + dt] with the noise increment built from `jumps`
/// (all in (t, t + dt]), sigma frozen at u.
StepOutput step(const GalerkinModel& model, const SolverConfig& config, const SpectralField& u, double t, double dt,
                std::span<const JumpEvent> jumps);

/// Applies a single jump sigma(u(tau-), z) as a zero-duration ledger row.
StepOutput apply_jump(const GalerkinModel& model, const SpectralField& u, const JumpEvent& jump);

/// Called after every accepted step or jump with the new state.
using StepObserver = std::function<void(const LedgerRow&, const SpectralField&)>;

/// Integrates with a given jump realization. Without an observer, states are
/// recorded at every step boundary (and jump time when jump-adapted).
/// Throws BlowUpError if the state becomes non-finite or |u|^2 > 1e200.
Trajectory integrate(const GalerkinModel& model, const SolverConfig& config, const SpectralField& initial,
                     const std::vector<JumpEvent>& jumps, const StepObserver& observer = {}, bool record = true);

/// Jump realization of a path seed: sample_jumps over the horizon from the
/// stream (seed, Jumps, 0).
std::vector<JumpEvent> path_jumps(const GalerkinModel& model, double horizon, std::uint64_t seed);

Trajectory integrate(const GalerkinModel& model, const SolverConfig& config, const SpectralField& initial,
                     std::uint64_t seed);

/// Two trajectories driven by the same jump realization.
std::pair<Trajectory, Trajectory> paired_integrate(const GalerkinModel& model, const SolverConfig& config,
                                                   const SpectralField& xi1, const SpectralField& xi2,
                                                   std::uint64_t seed);

struct EnergyAuditReport {
  /// |replayed - final| / (1 + final).
  double replay_error = 0;
  /// min over output times of |xi|^2 + sum(martingale + increment_sq - 2 dt conv)
  ///   - (|u(t)|^2 + sum dissipation); nonnegative up to rounding.
  double min_bookkeeping_slack = 0;
  /// The same with increment_sq replaced by the jump quadratic variation;
  /// differs from the bookkeeping slack by O(dt^2) drift terms.
  double min_jump_slack = 0;
  /// max over steps of the energy increase |u_{n+1}|^2 - |u_n|^2.
  double max_energy_increase = 0;
  double max_increment_sq = 0;
  /// max over steps of |<B(u,u),u>| / (1 + |u|^2 ||u||_2).
  double max_convection_ratio = 0;
  std::vector<std::size_t> flagged_steps;
  double min_stress_work = 0;
};

EnergyAuditReport energy_audit(const Trajectory& traj, double convection_tolerance = 1e-10);

/// CSV columns t, |u|, ||u||_1, ||u||_2, jumps (cumulative).
void write_trajectory_csv(const std::string& path, const Trajectory& traj, const GalerkinBasis& basis,
                          const std::vector<std::pair<std::string, std::string>>& comments = {});
/// One JSON object per ledger row.
void write_ledger_jsonl(std::ostream& os, const EnergyLedger& ledger);

/// Versioned binary state snapshot.
struct Snapshot {
  int dim = 2;
  double t = 0;
  std::string mode_table_hash;
  SpectralField state;
};

void write_snapshot(const std::string& path, const Snapshot& snap);
/// Throws std::runtime_error on bad magic, unsupported version or a
/// mode table hash that differs from `expected` (unless it is empty).
Snapshot read_snapshot(const std::string& path, const std::string& expected_hash = {});

}  // namespace bipolar
