#include "coopdock/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace coopdock {

namespace {

constexpr double kPi = std::numbers::pi;

JointState initial_state(const Vec3& eta1, const Vec3& eta2) {
  JointState q = JointState::Zero();
  q.segment<3>(0) = eta1;
  q.segment<3>(6) = eta2;
  return q;
}

}  // namespace

std::string_view to_string(ReferenceChoice choice) {
  return choice == ReferenceChoice::CurrentAligned ? "r1" : "r2";
}

std::optional<ReferenceChoice> reference_choice_from_string(std::string_view text) {
  if (text == "r1") return ReferenceChoice::CurrentAligned;
  if (text == "r2") return ReferenceChoice::Offset60;
  return std::nullopt;
}

ReferencePose docking_reference(const Vec2& centre, double heading, double d_min) {
  const Vec2 ahead(std::cos(heading), std::sin(heading));
  ReferencePose r;
  r.usv1 << centre + 0.5 * d_min * ahead, wrap_angle(heading);
  r.usv2 << centre - 0.5 * d_min * ahead, wrap_angle(heading - kPi);
  return r;
}

ReferencePose scenario_reference(const JointState& q_init, double current_heading,
                                 ReferenceChoice choice, double d_min) {
  const Vec2 centre = 0.5 * (q_init.segment<2>(0) + q_init.segment<2>(6));
  const double heading =
      choice == ReferenceChoice::CurrentAligned ? current_heading : current_heading + kPi / 3.0;
  return docking_reference(centre, heading, d_min);
}

void ScenarioConfig::set_reference(ReferenceChoice choice) {
  reference_choice = choice;
  scenario.reference =
      scenario_reference(scenario.q_init, scenario.current_heading, choice, mpc.d_min);
  scenario.reference_label = std::string(to_string(choice));
}

void ScenarioConfig::validate() const {
  mpc.validate();
  scenario.validate(mpc.d_min);
}

std::vector<std::string> builtin_scenario_ids() { return {"s1", "s2"}; }

ScenarioConfig builtin_scenario(std::string_view id, ControllerMode mode, ReferenceChoice choice) {
  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;
  s.usv1 = usv1_params();
  s.usv2 = usv2_params();
  cfg.mpc = MpcConfig::case_study(s.usv1, s.usv2);
  s.drag = Vec2(s.usv1.damping(0, 0), s.usv2.damping(0, 0));
  s.mode = mode;
  s.seed = 1;
  s.duration_steps = 240;
  if (id == "s1") {
    s.id = "s1";
    s.current_speed = 0.15;
    s.current_heading = kPi;
    s.q_init = initial_state(Vec3(-8.0, 4.0, 0.0), Vec3(8.0, -4.0, kPi / 2.0));
  } else if (id == "s2") {
    s.id = "s2";
    s.current_speed = 0.25;
    s.current_heading = kPi / 3.0;
    s.q_init = initial_state(Vec3(7.0, 6.0, kPi / 4.0), Vec3(-7.0, -6.0, kPi / 2.0));
  } else {
    throw std::invalid_argument("unknown built-in scenario '" + std::string(id) + "'");
  }
  cfg.set_reference(choice);
  return cfg;
}

std::vector<ScenarioConfig> evaluation_sweep(const ScenarioConfig& base) {
  std::vector<ScenarioConfig> runs;
  auto make = [&](ControllerMode mode, ReferenceChoice choice) {
    ScenarioConfig c = base;
    c.scenario.mode = mode;
    c.set_reference(choice);
    runs.push_back(c);
  };
  make(ControllerMode::Baseline, ReferenceChoice::CurrentAligned);
  make(ControllerMode::Cooperative, ReferenceChoice::CurrentAligned);
  make(ControllerMode::Cooperative, ReferenceChoice::Offset60);
  make(ControllerMode::CooperativeNoBias, ReferenceChoice::CurrentAligned);
  return runs;
}

std::string run_label(const ScenarioConfig& cfg) {
  std::string label = cfg.scenario.id + "_" + std::string(to_string(cfg.scenario.mode));
  if (cfg.scenario.mode != ControllerMode::Baseline) {
    label += "_" + cfg.scenario.reference_label;
  }
  return label;
}

}  // namespace coopdock
