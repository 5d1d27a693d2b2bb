#pragma once

#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coopdock/disturbance_observer.hpp"
#include "coopdock/nmpc_controller.hpp"
#include "coopdock/nmpc_problem.hpp"

namespace coopdock {

using Vec2 = Eigen::Vector2d;

enum class ControllerMode {
  Cooperative,       // both hulls move to the shared docking reference
  Baseline,          // USV1 keeps station at its initial pose, USV2 docks to it
  CooperativeNoBias  // cooperative, but the controller is fed b_hat = 0
};

// Short names used in configs and on the command line: coop, baseline, coop-nobias.
std::string_view to_string(ControllerMode mode);
std::optional<ControllerMode> controller_mode_from_string(std::string_view text);

struct DockingTolerance {
  double position = 0.5;                          // m
  double heading = 10.0 * std::numbers::pi / 180.0;  // rad
};

struct Scenario {
  std::string id = "custom";
  VesselParams usv1 = usv1_params();
  VesselParams usv2 = usv2_params();
  JointState q_init = JointState::Zero();
  double current_speed = 0.0;    // m/s
  double current_heading = 0.0;  // rad, direction the water flows towards
  Vec2 drag = Vec2(343.0, 704.0);  // N*s/m per hull
  ReferencePose reference;       // cooperative docking target
  std::string reference_label = "custom";
  ControllerMode mode = ControllerMode::Cooperative;
  int duration_steps = 200;      // N tilde
  std::uint64_t seed = 1;
  ObserverConfig observer;
  bool measurement_noise = false;
  PlantFidelity plant_fidelity = PlantFidelity::LinearLowSpeed;
  int plant_substeps = 1;
  DockingTolerance docking;

  // Throws std::invalid_argument naming the broken field.
  void validate(double d_min) const;
};

BiasPair current_to_bias(double speed, double heading, const Vec2& drag);

// Reference the controller tracks in the scenario's mode. In Baseline mode
// USV1 holds its initial pose and USV2 is placed stern to stern behind it.
ReferencePose effective_reference(const Scenario& scenario, double d_min);

struct StepRecord {
  double time = 0.0;
  JointState q = JointState::Zero();
  Vec2 psi_unwrapped = Vec2::Zero();
  Vec8 u = Vec8::Zero();
  Vec6 b_true = Vec6::Zero();  // [b1; b2] inertial
  Vec6 b_hat = Vec6::Zero();
  SolveStatus status = SolveStatus::NotSolved;
  double kkt = 0.0;
  double solve_time = 0.0;
  int iterations = 0;
  bool fallback = false;  // the shifted previous input was applied
  double max_slack = 0.0;
  double tracking_cost = 0.0;
  double control_cost = 0.0;
};

struct RunLog {
  std::string scenario_id;
  ControllerMode mode = ControllerMode::Cooperative;
  std::string reference_label;
  ReferencePose reference;  // the reference that was tracked
  double dt = 0.5;
  std::vector<StepRecord> records;  // N tilde + 1
  double j_tilde_running = 0.0;     // accumulated during the run
  bool aborted = false;
  std::string error;
};

struct RunOptions {
  bool record_solve_time = false;  // wall clock is not reproducible, off by default
  // Called after every logged control step with (k, record).
  std::function<void(int, const StepRecord&)> progress;
};

RunLog run_closed_loop(const Scenario& scenario, const MpcConfig& config,
                       const RunOptions& options = {});

double realized_cost(const RunLog& log, const ReferencePose& ref, const Vec3& q1_weights,
                     const Vec3& q2_weights, const Vec8& control_weights);

// Relative gain of a controller over the baseline; throws when J_baseline <= 0.
double relative_gain(double j_baseline, double j_controller);

// Start of the final stretch of the log during which both hulls stay within
// the tolerances of the reference; none when the last record is outside.
std::optional<double> docking_time(const RunLog& log, const ReferencePose& ref,
                                   const DockingTolerance& tol = {});

std::pair<double, double> path_length(const RunLog& log);

double min_separation(const RunLog& log);

struct Metrics {
  std::string scenario_id;
  std::string mode;
  std::string reference_label;
  double j_tilde = 0.0;
  std::optional<double> delta_j_rel;  // filled by comparisons
  std::optional<double> docking_time;
  double l1 = 0.0;
  double l2 = 0.0;
  double min_distance = 0.0;
  double final_distance = 0.0;
  int steps = 0;
  int fallback_steps = 0;
};

Metrics compute_metrics(const RunLog& log, const MpcConfig& config, const DockingTolerance& tol);

}  // namespace coopdock
