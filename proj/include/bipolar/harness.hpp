#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "bipolar/config.hpp"

namespace bipolar {

enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitConfig = 2, kExitBlowUp = 3 };

struct RunOptions {
  std::string out_dir;  // empty: config.output
  std::size_t workers = 1;
};

struct RunResult {
  int exit_code = kExitPass;
  std::string verdict;  // PASS, FAIL, INAPPLICABLE, REFUSED or BLOWUP
  nlohmann::json summary;
  std::vector<std::string> files;
};

/// Runs the named experiment and writes into the output directory:
///   summary.json       verdicts, measured constants, seeds, hashes
///   timing.json        wall-clock data, kept apart so summaries diff cleanly
///   <experiment>.csv   the result table
///   <experiment>.jsonl the same rows as JSON records
/// Numerical artifacts depend only on the config, never on the worker count.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options);

}  // namespace bipolar
