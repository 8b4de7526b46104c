#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

#include "bipolar/basis.hpp"
#include "bipolar/config.hpp"
#include "bipolar/ensemble.hpp"
#include "bipolar/harness.hpp"

namespace {

using namespace bipolar;

void print_config_errors(const ConfigError& e) {
  for (const auto& msg : e.errors()) std::cerr << "error: " << msg << '\n';
}

int cmd_run(const std::string& path, std::optional<std::uint64_t> seed, const std::string& out, std::size_t workers) {
  ExperimentConfig config;
  try {
    config = parse_config(path);
    if (seed) config.seed = *seed;
    validate_config(config);
  } catch (const ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  }
  RunOptions options;
  options.out_dir = out;
  options.workers = workers;
  const RunResult r = run_experiment(config, options);
  std::cout << to_string(config.experiment) << ": " << r.verdict << '\n';
  if (r.summary.contains("failure")) std::cout << "  " << r.summary["failure"].get<std::string>() << '\n';
  return r.exit_code;
}

int cmd_validate(const std::string& path) {
  try {
    const ExperimentConfig config = parse_config(path);
    std::cout << canonical_text(config) << "# config_hash: " << config_hash(config) << '\n';
    return kExitPass;
  } catch (const ConfigError& e) {
    print_config_errors(e);
    return kExitConfig;
  }
}

int cmd_basis(std::size_t m, int d) {
  try {
    const GalerkinBasis basis = build_basis(m, d);
    nlohmann::json j = basis_to_json(basis);
    j["lambda1"] = poincare_lambda1(basis);
    std::cout << j.dump(2) << '\n';
    return kExitPass;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Galerkin ensembles for stochastic bipolar fluids"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::size_t workers = default_workers();
  auto* run = app.add_subcommand("run", "Run the experiment named in a config file");
  run->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Root seed, overriding the config");
  run->add_option("--out", out_dir, "Output directory, overriding the config");
  run->add_option("--workers", workers, "Worker threads (default from BIPOLAR_WORKERS)")->check(CLI::PositiveNumber);

  auto* validate = app.add_subcommand("validate", "Check a config file and print its canonical form");
  validate->add_option("--config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  std::size_t m = 16;
  int d = 2;
  auto* basis = app.add_subcommand("basis", "Print the mode table and the Poincare constant");
  basis->add_option("--m", m, "Number of modes")->required();
  basis->add_option("--d", d, "Dimension (2 or 3)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, seed, out_dir, workers);
    if (*validate) return cmd_validate(config_path);
    return cmd_basis(m, d);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFail;
  }
}
