#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "demix/config.hpp"
#include "demix/report.hpp"

namespace demix {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitNumericalFailure = 3,
  kExitProvedViolation = 4,
};

struct ExitReport {
  int code = kExitOk;
  std::string status = "ok";
  std::string message;
  std::string output_dir;
  std::vector<std::string> files;
  std::vector<std::string> warnings;
  /// Proved reports with holds == false.
  std::vector<std::string> violations;
};

/// Bits of the trajectory.csv flags column.
enum StepFlagBits : unsigned {
  kFlagConverged = 1u,
  kFlagStagnated = 2u,
  kFlagDegenerateNormalization = 4u,
  kFlagQAvailable = 8u,
  kFlagLocalOnly = 16u,
};

unsigned flag_bits(const StepFlags& f);

nlohmann::json report_to_json(const EstimateReport& r);

/// Runs the configured mode and writes its artifacts under outputs.dir.
/// Errors are caught, written to error.json and mapped to an exit code.
ExitReport execute(const RunConfig& cfg);

/// Loads a config file and executes it. Config errors never throw.
ExitReport run_config_file(const std::string& path);

/// Re-runs the diagnostics suite on a finished jko output directory using
/// only its config.resolved.json and states.csv. Writes diagnose_reports.json.
ExitReport diagnose_directory(const std::string& dir);

/// Number of concurrent sweep members: DEMIX_WORKERS if set, else the
/// hardware concurrency, at least 1.
unsigned sweep_workers();

}  // namespace demix
