#include "coopdock/run_log_io.hpp"

#include <charconv>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace coopdock {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

double parse_double(const std::string& text, int line, const std::string& column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::runtime_error("run csv line " + std::to_string(line) + ": column " + column +
                             " is not a number: '" + text + "'");
  }
  return v;
}

}  // namespace

const std::vector<std::string>& run_csv_columns() {
  static const std::vector<std::string> columns = [] {
    std::vector<std::string> c = {"time_s", "x1", "y1", "psi1", "u1", "v1", "w1",
                                  "x2",     "y2", "psi2", "u2", "v2", "w2"};
    for (int i = 0; i < 8; ++i) c.push_back("u" + std::to_string(i));
    for (int i = 0; i < 6; ++i) c.push_back("b_true" + std::to_string(i));
    for (int i = 0; i < 6; ++i) c.push_back("b_hat" + std::to_string(i));
    for (const char* extra : {"solver_status", "kkt", "solve_time_s", "iterations", "fallback",
                              "max_slack", "tracking_cost", "control_cost", "psi1_unwrapped",
                              "psi2_unwrapped"}) {
      c.push_back(extra);
    }
    return c;
  }();
  return columns;
}

void write_run_csv(std::ostream& out, const RunLog& log) {
  const auto& cols = run_csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out << (i ? "," : "") << cols[i];
  }
  out << '\n';
  for (const StepRecord& r : log.records) {
    out << fmt(r.time);
    for (int i = 0; i < 12; ++i) out << ',' << fmt(r.q(i));
    for (int i = 0; i < 8; ++i) out << ',' << fmt(r.u(i));
    for (int i = 0; i < 6; ++i) out << ',' << fmt(r.b_true(i));
    for (int i = 0; i < 6; ++i) out << ',' << fmt(r.b_hat(i));
    out << ',' << to_string(r.status) << ',' << fmt(r.kkt) << ',' << fmt(r.solve_time) << ','
        << r.iterations << ',' << (r.fallback ? 1 : 0) << ',' << fmt(r.max_slack) << ','
        << fmt(r.tracking_cost) << ',' << fmt(r.control_cost) << ',' << fmt(r.psi_unwrapped(0))
        << ',' << fmt(r.psi_unwrapped(1)) << '\n';
  }
}

std::string run_csv_text(const RunLog& log) {
  std::ostringstream out;
  write_run_csv(out, log);
  return out.str();
}

std::vector<StepRecord> read_run_csv(std::istream& in) {
  const auto& cols = run_csv_columns();
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("run csv is empty");
  }
  const std::vector<std::string> header = split(line);
  if (header != cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i >= header.size() || header[i] != cols[i]) {
        throw std::runtime_error("run csv header: expected column '" + cols[i] + "' at position " +
                                 std::to_string(i));
      }
    }
    throw std::runtime_error("run csv header has unexpected extra columns");
  }
  std::vector<StepRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line);
    if (f.size() != cols.size()) {
      throw std::runtime_error("run csv line " + std::to_string(line_no) + ": expected " +
                               std::to_string(cols.size()) + " fields, got " +
                               std::to_string(f.size()));
    }
    auto num = [&](std::size_t i) { return parse_double(f[i], line_no, cols[i]); };
    StepRecord r;
    std::size_t c = 0;
    r.time = num(c++);
    for (int i = 0; i < 12; ++i) r.q(i) = num(c++);
    for (int i = 0; i < 8; ++i) r.u(i) = num(c++);
    for (int i = 0; i < 6; ++i) r.b_true(i) = num(c++);
    for (int i = 0; i < 6; ++i) r.b_hat(i) = num(c++);
    const auto status = solve_status_from_string(f[c]);
    if (!status) {
      throw std::runtime_error("run csv line " + std::to_string(line_no) +
                               ": unknown solver_status '" + f[c] + "'");
    }
    r.status = *status;
    ++c;
    r.kkt = num(c++);
    r.solve_time = num(c++);
    r.iterations = static_cast<int>(num(c++));
    r.fallback = num(c++) != 0.0;
    r.max_slack = num(c++);
    r.tracking_cost = num(c++);
    r.control_cost = num(c++);
    r.psi_unwrapped(0) = num(c++);
    r.psi_unwrapped(1) = num(c++);
    records.push_back(r);
  }
  return records;
}

std::string metrics_json_text(const Metrics& m, const ScenarioConfig& config, const RunLog& log) {
  using nlohmann::json;
  auto optional = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  const ReferencePose& ref = log.reference;
  json j = {
      {"scenario_id", m.scenario_id},
      {"mode", m.mode},
      {"reference_label", m.reference_label},
      {"J_tilde", m.j_tilde},
      {"delta_J_rel", optional(m.delta_j_rel)},
      {"docking_time", optional(m.docking_time)},
      {"l1", m.l1},
      {"l2", m.l2},
      {"min_distance", m.min_distance},
      {"final_distance", m.final_distance},
      {"steps", m.steps},
      {"fallback_steps", m.fallback_steps},
      {"aborted", log.aborted},
      {"dt", log.dt},
      {"d_min", config.mpc.d_min},
      {"seed", config.scenario.seed},
      {"current", {{"speed", config.scenario.current_speed},
                   {"heading", config.scenario.current_heading}}},
      {"reference", {{"usv1", {ref.usv1(0), ref.usv1(1), ref.usv1(2)}},
                     {"usv2", {ref.usv2(0), ref.usv2(1), ref.usv2(2)}}}},
      {"docking_tolerance", {{"position", config.scenario.docking.position},
                             {"heading", config.scenario.docking.heading}}},
  };
  if (log.aborted) {
    j["error"] = log.error;
  }
  return j.dump(2) + "\n";
}

}  // namespace coopdock
