#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "coopdock/docking_sim.hpp"
#include "coopdock/scenarios.hpp"

namespace coopdock {

// Column names of the run CSV, in order.
const std::vector<std::string>& run_csv_columns();

// One header row and one row per record; reals with 12 significant digits.
void write_run_csv(std::ostream& out, const RunLog& log);
std::string run_csv_text(const RunLog& log);

// Parses the records of a run CSV. Throws std::runtime_error naming the
// offending line or column. Scenario metadata (id, mode, reference, dt) is
// not part of the CSV and is left to the caller.
std::vector<StepRecord> read_run_csv(std::istream& in);

// Metrics plus the scenario fields a plotter needs (current, reference, d_min).
std::string metrics_json_text(const Metrics& metrics, const ScenarioConfig& config,
                              const RunLog& log);

}  // namespace coopdock
