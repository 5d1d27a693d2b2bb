#include "coopdock/docking_sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <tuple>
#include <stdexcept>

namespace coopdock {

namespace {

Vec6 stack_bias(const BiasPair& b) {
  Vec6 v;
  v << b.usv1.f, b.usv2.f;
  return v;
}

double planar_distance(const JointState& q) { return (q.segment<2>(0) - q.segment<2>(6)).norm(); }

// Full measurement of one hull, optionally corrupted by sensor noise.
Measurement measure(const VesselState& truth, const ObserverConfig& cfg, bool noisy,
                    std::mt19937_64& rng) {
  Eigen::VectorXd y(6);
  y << truth.eta, truth.nu;
  if (noisy) {
    std::normal_distribution<double> n(0.0, 1.0);
    const double sigma[6] = {cfg.sigma_position, cfg.sigma_position, cfg.sigma_heading,
                             cfg.sigma_velocity, cfg.sigma_velocity, cfg.sigma_yaw_rate};
    for (int i = 0; i < 6; ++i) {
      y(i) += sigma[i] * n(rng);
    }
    y(2) = wrap_angle(y(2));
  }
  return Measurement{y, MeasurementKind::Full};
}

VesselState plant_step(const VesselParams& p, VesselState s, const Vec3& tau, const BiasForce& b,
                       PlantFidelity fidelity, double dt, int substeps) {
  const double h = dt / substeps;
  for (int i = 0; i < substeps; ++i) {
    s = euler_step(p, s, tau, b, fidelity, h);
  }
  return s;
}

WarmStart shift_warm_start(const WarmStart& ws, const NmpcProblem& problem) {
  MpcSolution tmp;
  tmp.u_seq = ws.u;
  tmp.q_pred = ws.q;
  tmp.slack = ws.slack;
  return shift_warm_start(tmp, problem);
}

bool inputs_admissible(const MpcSolution& sol, const NmpcProblem& problem) {
  const ResidualReport r = constraint_residuals(sol, problem);
  const double tol = problem.config().tolerance;
  return r.input_box <= tol && r.rate <= tol && r.dynamics <= tol;
}

}  // namespace

std::string_view to_string(ControllerMode mode) {
  switch (mode) {
    case ControllerMode::Cooperative: return "coop";
    case ControllerMode::Baseline: return "baseline";
    case ControllerMode::CooperativeNoBias: return "coop-nobias";
  }
  return "unknown";
}

std::optional<ControllerMode> controller_mode_from_string(std::string_view text) {
  for (ControllerMode m :
       {ControllerMode::Cooperative, ControllerMode::Baseline, ControllerMode::CooperativeNoBias}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

void Scenario::validate(double d_min) const {
  auto fail = [this](const std::string& what) {
    throw std::invalid_argument("scenario " + id + ": " + what);
  };
  usv1.validate();
  usv2.validate();
  if (!q_init.allFinite()) fail("initial state must be finite");
  if (!std::isfinite(current_speed) || current_speed < 0.0) fail("current speed must be >= 0");
  if (!std::isfinite(current_heading)) fail("current heading must be finite");
  if (!drag.allFinite() || drag.minCoeff() < 0.0) fail("drag coefficients must be >= 0");
  if (duration_steps < 1) fail("duration must be at least one step");
  if (plant_substeps < 1) fail("plant substeps must be at least 1");
  if (!(docking.position > 0.0) || !(docking.heading > 0.0)) fail("docking tolerances must be positive");
  const ReferenceCheck check = validate_reference(reference, d_min);
  if (!check.valid) fail("invalid reference: " + check.message);
}

BiasPair current_to_bias(double speed, double heading, const Vec2& drag) {
  if (!(speed >= 0.0)) {
    throw std::invalid_argument("current speed must be non-negative");
  }
  const Vec3 dir(std::cos(heading), std::sin(heading), 0.0);
  return BiasPair{BiasForce{drag(0) * speed * dir}, BiasForce{drag(1) * speed * dir}};
}

ReferencePose effective_reference(const Scenario& scenario, double d_min) {
  if (scenario.mode != ControllerMode::Baseline) {
    return scenario.reference;
  }
  ReferencePose r;
  r.usv1 = scenario.q_init.segment<3>(0);
  r.usv1(2) = wrap_angle(r.usv1(2));
  const Eigen::Vector2d ahead(std::cos(r.usv1(2)), std::sin(r.usv1(2)));
  r.usv2.head<2>() = r.usv1.head<2>() - d_min * ahead;
  r.usv2(2) = wrap_angle(r.usv1(2) - std::numbers::pi);
  return r;
}

RunLog run_closed_loop(const Scenario& scenario, const MpcConfig& config, const RunOptions& options) {
  config.validate();
  scenario.validate(config.d_min);

  RunLog log;
  log.scenario_id = scenario.id;
  log.mode = scenario.mode;
  log.reference_label = scenario.mode == ControllerMode::Baseline ? "baseline" : scenario.reference_label;
  log.reference = effective_reference(scenario, config.d_min);
  log.dt = config.dt;
  log.records.reserve(scenario.duration_steps + 1);

  const BiasPair truth = current_to_bias(scenario.current_speed, scenario.current_heading, scenario.drag);
  std::mt19937_64 rng(scenario.seed);
  const double dt = config.dt;

  VesselState s1 = usv1_state(scenario.q_init);
  VesselState s2 = usv2_state(scenario.q_init);
  s1.eta(2) = wrap_angle(s1.eta(2));
  s2.eta(2) = wrap_angle(s2.eta(2));
  Vec2 psi_unwrapped(scenario.q_init(2), scenario.q_init(8));

  ObserverState obs1;
  ObserverState obs2;
  Vec8 u_prev = Vec8::Zero();
  std::optional<WarmStart> warm;
  const NmpcSolver solver;

  auto make_record = [&](int k) {
    StepRecord r;
    r.time = k * dt;
    r.q = join_states(s1, s2);
    r.psi_unwrapped = psi_unwrapped;
    r.b_true = stack_bias(truth);
    return r;
  };

  for (int k = 0; k < scenario.duration_steps; ++k) {
    StepRecord rec = make_record(k);

    const Measurement y1 = measure(s1, scenario.observer, scenario.measurement_noise, rng);
    const Measurement y2 = measure(s2, scenario.observer, scenario.measurement_noise, rng);
    if (k == 0) {
      obs1 = make_observer(VesselState{y1.value.head<3>(), y1.value.tail<3>()}, scenario.observer);
      obs2 = make_observer(VesselState{y2.value.head<3>(), y2.value.tail<3>()}, scenario.observer);
    }
    try {
      obs1 = ekf_update(obs1, y1);
      obs2 = ekf_update(obs2, y2);
    } catch (const std::exception& e) {
      log.aborted = true;
      log.error = std::string("observer failure: ") + e.what();
      break;
    }
    const BiasPair estimate{bias_estimate(obs1), bias_estimate(obs2)};
    rec.b_hat = stack_bias(estimate);

    JointState q_meas;
    q_meas << y1.value, y2.value;
    const BiasPair fed = scenario.mode == ControllerMode::CooperativeNoBias ? BiasPair{} : estimate;

    Vec8 u = u_prev;
    bool applied_solution = false;
    try {
      const NmpcProblem problem(config, scenario.usv1, scenario.usv2, q_meas, u_prev, fed, log.reference);
      const auto t0 = std::chrono::steady_clock::now();
      const MpcSolution sol = solver.solve(problem, warm);
      const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      rec.status = sol.status;
      rec.kkt = sol.kkt_residual;
      rec.iterations = sol.iterations;
      rec.max_slack = sol.max_slack;
      rec.solve_time = options.record_solve_time ? elapsed : 0.0;
      const bool usable = sol.status == SolveStatus::Optimal || sol.status == SolveStatus::Relaxed ||
                          (sol.status == SolveStatus::MaxIter && inputs_admissible(sol, problem));
      if (usable) {
        u = sol.first_input();
        warm = shift_warm_start(sol, problem);
        applied_solution = true;
      } else if (warm) {
        u = warm->u.front();
        warm = shift_warm_start(*warm, problem);
      }
    } catch (const std::exception& e) {
      log.aborted = true;
      log.error = std::string("controller failure: ") + e.what();
      break;
    }
    rec.fallback = !applied_solution;
    rec.u = u;
    rec.tracking_cost = tracking_cost(rec.q, log.reference, config.q1_weights, config.q2_weights);
    rec.control_cost = control_cost(u, config.control_weights);
    log.j_tilde_running += rec.tracking_cost + rec.control_cost;
    log.records.push_back(rec);
    if (options.progress) {
      options.progress(k, log.records.back());
    }

    const JointControl cmd = JointControl::from_flat(u);
    const Vec3 tau1 = allocate_fixed(cmd.usv1, scenario.usv1);
    const Vec3 tau2 = allocate_azimuth(cmd.usv2, scenario.usv2);
    const double psi1_before = s1.eta(2);
    const double psi2_before = s2.eta(2);
    s1 = plant_step(scenario.usv1, s1, tau1, truth.usv1, scenario.plant_fidelity, dt, scenario.plant_substeps);
    s2 = plant_step(scenario.usv2, s2, tau2, truth.usv2, scenario.plant_fidelity, dt, scenario.plant_substeps);
    psi_unwrapped(0) += wrap_angle(s1.eta(2) - psi1_before);
    psi_unwrapped(1) += wrap_angle(s2.eta(2) - psi2_before);
    if (!s1.stacked().allFinite() || !s2.stacked().allFinite()) {
      log.aborted = true;
      log.error = "plant state became non-finite";
      break;
    }
    obs1 = ekf_predict(obs1, VesselCommand{cmd.usv1}, scenario.usv1, dt);
    obs2 = ekf_predict(obs2, VesselCommand{cmd.usv2}, scenario.usv2, dt);
    u_prev = u;
  }

  if (!log.aborted) {
    // Closing record: final state, the last applied input repeated.
    StepRecord rec = make_record(scenario.duration_steps);
    rec.u = u_prev;
    rec.b_hat = log.records.empty() ? Vec6::Zero() : log.records.back().b_hat;
    rec.tracking_cost = tracking_cost(rec.q, log.reference, config.q1_weights, config.q2_weights);
    rec.control_cost = control_cost(rec.u, config.control_weights);
    log.j_tilde_running += rec.tracking_cost + rec.control_cost;
    log.records.push_back(rec);
  }
  return log;
}

double realized_cost(const RunLog& log, const ReferencePose& ref, const Vec3& q1_weights,
                     const Vec3& q2_weights, const Vec8& control_weights) {
  if (log.records.empty()) {
    throw std::invalid_argument("realized cost needs a nonempty log");
  }
  double j = 0.0;
  for (const StepRecord& r : log.records) {
    j += tracking_cost(r.q, ref, q1_weights, q2_weights) + control_cost(r.u, control_weights);
  }
  return j;
}

double relative_gain(double j_baseline, double j_controller) {
  if (!(j_baseline > 0.0)) {
    throw std::invalid_argument("baseline cost must be positive");
  }
  return (j_baseline - j_controller) / j_baseline;
}

std::optional<double> docking_time(const RunLog& log, const ReferencePose& ref,
                                   const DockingTolerance& tol) {
  if (!(tol.position > 0.0) || !(tol.heading > 0.0)) {
    throw std::invalid_argument("docking tolerances must be positive");
  }
  auto inside = [&](const StepRecord& r) {
    const JointState& q = r.q;
    return (q.segment<2>(0) - ref.usv1.head<2>()).norm() < tol.position &&
           (q.segment<2>(6) - ref.usv2.head<2>()).norm() < tol.position &&
           std::abs(wrap_angle(q(2) - ref.usv1(2))) < tol.heading &&
           std::abs(wrap_angle(q(8) - ref.usv2(2))) < tol.heading;
  };
  const int n = static_cast<int>(log.records.size());
  int first = n;
  while (first > 0 && inside(log.records[first - 1])) {
    --first;
  }
  if (first == n) {
    return std::nullopt;
  }
  return first * log.dt;
}

std::pair<double, double> path_length(const RunLog& log) {
  if (log.records.empty()) {
    throw std::invalid_argument("path length needs a nonempty log");
  }
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t k = 1; k < log.records.size(); ++k) {
    const JointState& a = log.records[k - 1].q;
    const JointState& b = log.records[k].q;
    l1 += (b.segment<2>(0) - a.segment<2>(0)).norm();
    l2 += (b.segment<2>(6) - a.segment<2>(6)).norm();
  }
  return {l1, l2};
}

double min_separation(const RunLog& log) {
  double d = std::numeric_limits<double>::infinity();
  for (const StepRecord& r : log.records) {
    d = std::min(d, planar_distance(r.q));
  }
  return d;
}

Metrics compute_metrics(const RunLog& log, const MpcConfig& config, const DockingTolerance& tol) {
  Metrics m;
  m.scenario_id = log.scenario_id;
  m.mode = std::string(to_string(log.mode));
  m.reference_label = log.reference_label;
  m.j_tilde = realized_cost(log, log.reference, config.q1_weights, config.q2_weights,
                            config.control_weights);
  m.docking_time = docking_time(log, log.reference, tol);
  std::tie(m.l1, m.l2) = path_length(log);
  m.min_distance = min_separation(log);
  m.final_distance = planar_distance(log.records.back().q);
  m.steps = static_cast<int>(log.records.size()) - 1;
  m.fallback_steps = static_cast<int>(
      std::count_if(log.records.begin(), log.records.end(), [](const StepRecord& r) { return r.fallback; }));
  return m;
}

}  // namespace coopdock
