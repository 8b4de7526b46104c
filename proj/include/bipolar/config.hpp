#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bipolar/noise.hpp"
#include "bipolar/operators.hpp"
#include "bipolar/solver.hpp"

namespace bipolar {

/// Every problem found while reading a config, one message per entry,
/// each prefixed with the line number and/or the field name.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> errors);
  const std::vector<std::string>& errors() const { return errors_; }

 private:
  std::vector<std::string> errors_;
};

enum class Experiment { Moments, Cauchy, Contraction, Feller, Occupation, InvariantBound, Audit };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);
std::vector<std::string> experiment_names();

struct InitialConfig {
  std::string kind = "fixed";  // fixed | gaussian
  std::vector<double> coefficients;
  double scale = 0.5;
  std::size_t modes = 8;
  double decay = 0.5;
  friend bool operator==(const InitialConfig&, const InitialConfig&) = default;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Moments;
  std::string output = "results";

  FluidParams fluid;

  int dim = 2;
  std::size_t m = 16;
  /// Unset: min(1e-3, 0.1 / (lambda_max kappa1)) at the finest level.
  std::optional<double> dt;
  double horizon = 1.0;
  Scheme scheme = Scheme::SemiImplicit;
  JumpHandling jumps = JumpHandling::Grid;
  bool stress = true;
  bool convection = true;
  std::vector<std::size_t> levels;  // empty: {m}

  NoiseSpec noise;
  /// Declared constants; unset entries take the closed-form value.
  std::optional<double> l0, l1, l2, l3;

  std::size_t paths = 1000;
  std::uint64_t seed = 1;
  InitialConfig initial;

  std::vector<int> orders{1, 2};
  std::vector<double> separations{1e-1, 1e-2, 1e-3};
  std::size_t samples = 11;

  std::vector<std::string> ck_functionals{"gaussian", "saturating_energy", "cosine"};
  double ck_t = 0.25;
  double ck_s = 0.25;
  std::size_t ck_outer = 200;
  std::size_t ck_inner = 20;
  std::string feller_functional = "gaussian";
  std::size_t feller_count = 6;
  std::size_t feller_mode = 0;

  std::vector<std::string> occupation_functionals{"energy", "l2_sq", "saturating_energy"};
  std::vector<double> schedule{4, 6, 8, 10};
  double burn_in = 2.0;
  double block_length = 0.5;
  std::size_t replicas = 4;

  double tolerance = 0.2;
  double zero_floor = 1e-6;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  /// Levels used by multi-level experiments.
  std::vector<std::size_t> effective_levels() const { return levels.empty() ? std::vector<std::size_t>{m} : levels; }
  /// Declared constants, with closed-form values filling unset entries.
  NoiseConstants declared_constants() const;
  double time_step() const;
  SolverConfig solver(std::size_t level) const;
};

/// Reads "key = value" lines. "[section]" lines prefix the following keys
/// with "section."; "#" starts a comment. Unknown keys, duplicates and
/// invalid values are collected and thrown together as a ConfigError.
ExperimentConfig parse_config_text(const std::string& text, const std::string& source = "<config>");
ExperimentConfig parse_config(const std::string& path);

/// Semantic checks on a config built in code; parse_config runs them too.
void validate_config(const ExperimentConfig& config);

/// Every key in a fixed order with explicit values; parsing it gives back
/// an equal config.
std::string canonical_text(const ExperimentConfig& config);

/// git-style SHA-1 of the canonical text.
std::string config_hash(const ExperimentConfig& config);

}  // namespace bipolar
