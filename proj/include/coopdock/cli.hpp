#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coopdock/docking_sim.hpp"
#include "coopdock/scenarios.hpp"

namespace coopdock {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 2,
  kExitSolverFailure = 3,
  kExitIoError = 4,
};

// Result of one run written to disk.
struct RunArtifacts {
  std::filesystem::path csv;
  std::filesystem::path metrics;
  Metrics metrics_value;
  RunLog log;
};

struct RunSettings {
  bool quiet = true;
  bool record_solve_time = false;
};

// Simulates `config` and writes <out_dir>/run.csv and <out_dir>/metrics.json.
// The metrics are recomputed from the CSV as read back. Throws
// std::filesystem::filesystem_error or std::ios_base::failure on I/O problems.
RunArtifacts execute_run(const ScenarioConfig& config, const std::filesystem::path& out_dir,
                         const RunSettings& settings, std::ostream& progress);

struct ComparisonRow {
  std::string label;
  Metrics metrics;
};

// Fills delta_j_rel of every row from its baseline: the row labelled
// `baseline_label` when given, otherwise the Baseline-mode row of the same
// scenario id. Rows without a baseline keep an empty gain.
void assign_relative_gains(std::vector<ComparisonRow>& rows,
                           const std::optional<std::string>& baseline_label);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_table(const std::vector<ComparisonRow>& rows);

// Entry point of the coopdock executable. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace coopdock
