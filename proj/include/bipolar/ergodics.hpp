#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bipolar/ensemble.hpp"
#include "bipolar/noise.hpp"
#include "bipolar/solver.hpp"
#include "bipolar/stats.hpp"

namespace bipolar {

// ---- functionals -----------------------------------------------------------

struct Functional {
  std::string name;
  bool bounded = false;
  std::function<double(const SpectralField&, const GalerkinBasis&)> eval;
};

/// Registered functionals. Bounded: one, gaussian = exp(-|u|^2),
/// saturating_energy = |u|^2 / (1 + |u|^2), cosine = cos(u_1).
/// Unbounded: l2_sq = |u|^2, h2_sq = ||u||_2^2, energy = |u|^2 + ||u||_2^2.
const Functional& functional(const std::string& name);
std::vector<std::string> functional_names();

// ---- moments ---------------------------------------------------------------

struct MomentReport {
  int r = 1;
  std::size_t paths = 0;
  std::size_t blowups = 0;
  Estimate sup_moment;   // E sup_t |u|^{2r}
  Estimate dissipation;  // E int ||u||_2^2 |u|^{2r-2} dt
  Estimate terminal;     // E |u(T)|^{2r}
  Interval sup_interval;
  Interval dissipation_interval;
};

/// Blown-up members are excluded from the estimates and counted.
MomentReport mc_moment(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec, int r);

// ---- Galerkin convergence --------------------------------------------------

struct CauchyRow {
  std::size_t coarse = 0, fine = 0;
  Estimate terminal_gap;    // E |u_coarse(T) - u_fine(T)|^2
  Estimate integrated_gap;  // E int ||u_coarse - u_fine||_2^2 dt
};

struct CauchyReport {
  std::vector<CauchyRow> rows;
  std::size_t blowups = 0;
  bool decreasing = false;   // terminal gaps strictly decreasing
  double last_ratio = 0;     // last gap / previous gap
  bool converged = false;    // decreasing and last_ratio < 1/2
  bool refine_dt = false;    // non-monotone tail
};

/// Models must be nested levels of one system, in increasing order. All
/// levels share the jump realization and the nested initial condition.
CauchyReport cauchy_study(const std::vector<const GalerkinModel*>& models, const SolverConfig& config,
                          const EnsembleSpec& spec);

// ---- pathwise contraction --------------------------------------------------

struct ContractionReport {
  double separation = 0;            // |xi1 - xi2|
  double c0 = 0;                    // convection constant in the weight
  std::vector<double> times;
  std::vector<Estimate> statistic;  // E[rho |w|^2] / |xi1 - xi2|^2
  std::vector<Estimate> weighted;   // E[rho |w|^2]
  double max_pathwise_ratio = 0;    // max over paths and times of |w|^2 / |xi1 - xi2|^2
  std::size_t blowups = 0;
};

/// Paired ensembles from xi1 and xi2 with common jumps and the weight
/// rho(t) = exp(-(c0^2 / kappa1) int_0^t ||u_1||_2^2 ds); c0 is ignored
/// when convection is off. Statistics at `samples` evenly spaced times.
ContractionReport uniqueness_contraction(const GalerkinModel& model, const SolverConfig& config,
                                         const EnsembleSpec& spec, const SpectralField& xi1,
                                         const SpectralField& xi2, double c0, std::size_t samples = 11);

/// Bounded by one constant: the 2-sigma intervals of all reports overlap
/// at every sampled time.
bool contraction_consistent(const std::vector<ContractionReport>& reports, double z = 2.0);

// ---- semigroup -------------------------------------------------------------

/// P_t phi(xi) = E phi(u(t; xi)) with t = config.horizon. Throws
/// std::invalid_argument for unregistered or unbounded functionals.
Estimate semigroup_eval(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                        const std::string& name, const SpectralField& xi);

struct ChapmanKolmogorovReport {
  Estimate direct;  // P_{t+s} phi(xi)
  Estimate nested;  // P_t (P_s phi)(xi)
  double z = 0;     // |direct - nested| / joint error
  bool pass = false;
};

/// Direct estimate with spec.paths members; nested estimate with `outer`
/// paths to time t, each restarted with `inner` paths over s.
ChapmanKolmogorovReport chapman_kolmogorov(const GalerkinModel& model, const SolverConfig& config,
                                           const EnsembleSpec& spec, const std::string& name,
                                           const SpectralField& xi, double t, double s, std::size_t outer,
                                           std::size_t inner, double sigmas = 4.0);

struct FellerReport {
  std::vector<double> distances;  // |xi_k - xi|
  std::vector<Estimate> modulus;  // |P_t phi(xi_k) - P_t phi(xi)| with CRN
  bool monotone = false;
};

/// xi_k = xi + 2^{-k} direction for k = 1..count, every member driven by the
/// same jumps for all k.
FellerReport feller_modulus(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                            const std::string& name, const SpectralField& xi, const SpectralField& direction,
                            std::size_t count, double z = 2.0);

// ---- occupation measures ---------------------------------------------------

struct OccupationRow {
  double horizon = 0;
  std::vector<Estimate> averages;  // one per functional, error by block bootstrap
};

struct OccupationMeasure {
  std::vector<std::string> functionals;
  double burn_in = 0;
  double block_length = 0;
  std::size_t replicas = 0;
  std::vector<OccupationRow> rows;
  bool stabilized = false;
  bool truncated = false;
  std::string truncation_reason;
};

struct OccupationSpec {
  std::vector<std::string> functionals{"energy"};
  std::vector<double> schedule;  // increasing T_n; the last one is the run length
  double burn_in = 0;
  double block_length = 1.0;
  std::size_t replicas = 1;
  std::uint64_t seed = 1;
  std::size_t workers = 1;
};

/// Running averages (1 / (T_n - burn_in)) int_{burn_in}^{T_n} f(u) dt over
/// independent chains started at xi. A blow-up stops the run and returns the
/// rows completed before it.
OccupationMeasure occupation_measure(const GalerkinModel& model, const SolverConfig& config,
                                     const SpectralField& xi, const OccupationSpec& spec);

// ---- invariant moment bound ------------------------------------------------

struct RegimeReport {
  bool admissible = false;
  double dissipation = 0;  // 2 kappa1 lambda1^2
  double growth = 0;       // l1
  std::string message;
};

RegimeReport ergodic_regime(double kappa1, double lambda1, double l1);

/// l0 / (2 kappa1 lambda1^2 - l1) ((l1 + 1) / (2 kappa1) + 1) + l0 / (2 kappa1).
/// Throws std::domain_error outside the regime.
double invariant_bound(double kappa1, double lambda1, double l0, double l1);

struct InvariantCheck {
  RegimeReport regime;
  bool refused = false;
  double lambda1 = 0;
  double bound = 0;
  double tolerance = 0.2;
  double zero_floor = 1e-6;
  Estimate measured;
  bool pass = false;
  OccupationMeasure occupation;
};

/// Time average of |u|^2 + ||u||_2^2 against the bound from the declared
/// constants. Passes iff measured <= bound (1 + tolerance); when l0 = 0 the
/// bound is 0 and the check instead requires measured < zero_floor.
/// Outside the regime the run is refused and `refused` is set.
InvariantCheck invariant_moment_check(const GalerkinModel& model, const SolverConfig& config,
                                      const SpectralField& xi, const NoiseConstants& declared,
                                      const OccupationSpec& spec, double tolerance = 0.2, double zero_floor = 1e-6);

// ---- Gronwall audit --------------------------------------------------------

/// Sampled processes of one member on the shared time grid. `x_integral`
/// is int_0^t X, `phi_integral` is int_0^t phi and `phi_x` is int_0^t phi X.
struct GronwallPath {
  std::vector<double> x, y, i, x_integral, phi_integral, phi_x;
  double z = 0;
};

struct GronwallConstants {
  double c = 0, alpha = 0, beta = 0, gamma = 0, delta = 0, c_tilde = 0;
};

struct GronwallReport {
  enum class Status { Pass, Fail, Inapplicable };
  Status status = Status::Inapplicable;
  std::vector<std::string> violations;  // failed hypotheses
  std::vector<double> lhs, rhs;         // E[X + alpha Y] and the bound per time
  double margin = 0;                    // min over times of rhs - lhs
};

std::string to_string(GronwallReport::Status s);

GronwallReport gronwall_audit(const std::vector<double>& times, const std::vector<GronwallPath>& paths,
                              const GronwallConstants& constants);

/// Processes of the energy inequality with phi = 0:
///   X = sup_{s<=t} |u|^2, Y = int ||u||_2^2, Z = 2 |xi|^2,
///   I = 2 (sup_{s<=t} |M(s)| + Q(t)),
/// M the martingale part and Q the summed squared increments of the ledger.
GronwallPath gronwall_path(const Trajectory& traj, const std::vector<double>& times, double kappa1);

/// alpha = 2 kappa1, beta = 1/2, delta = kappa1, gamma = 2 l1, C = 0, and
/// C-tilde as the smallest constant making the expectation hypothesis hold
/// on the sampled means.
GronwallConstants measure_gronwall_constants(const std::vector<double>& times,
                                             const std::vector<GronwallPath>& paths, double kappa1, double l1);

struct GronwallStudy {
  std::vector<double> times;
  GronwallConstants constants;
  GronwallReport report;
  std::size_t blowups = 0;
};

GronwallStudy gronwall_study(const GalerkinModel& model, const SolverConfig& config, const EnsembleSpec& spec,
                             double l1, std::size_t samples = 21);

}  // namespace bipolar
