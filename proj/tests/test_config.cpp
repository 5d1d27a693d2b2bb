#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "coopdock/config.hpp"

using namespace coopdock;

namespace {

std::filesystem::path scenario_dir() {
  const char* dir = std::getenv("COOPDOCK_SCENARIO_DIR");
  return dir ? std::filesystem::path(dir) : std::filesystem::path("scenarios");
}

void check_same(const ScenarioConfig& a, const ScenarioConfig& b) {
  const Scenario& s = a.scenario;
  const Scenario& t = b.scenario;
  CHECK(s.id == t.id);
  CHECK(s.seed == t.seed);
  CHECK(s.duration_steps == t.duration_steps);
  CHECK(s.mode == t.mode);
  CHECK(s.q_init == t.q_init);
  CHECK(s.current_speed == t.current_speed);
  CHECK(s.current_heading == t.current_heading);
  CHECK(s.drag == t.drag);
  CHECK(s.reference.usv1 == t.reference.usv1);
  CHECK(s.reference.usv2 == t.reference.usv2);
  CHECK(s.reference_label == t.reference_label);
  CHECK(s.measurement_noise == t.measurement_noise);
  CHECK(s.plant_fidelity == t.plant_fidelity);
  CHECK(s.plant_substeps == t.plant_substeps);
  CHECK(s.docking.position == t.docking.position);
  CHECK(s.docking.heading == t.docking.heading);
  for (auto [p, q] : {std::pair{&s.usv1, &t.usv1}, std::pair{&s.usv2, &t.usv2}}) {
    CHECK(p->mass == q->mass);
    CHECK(p->damping == q->damping);
    CHECK(p->length == q->length);
    CHECK(p->width == q->width);
    CHECK(p->bow_tilt == doctest::Approx(q->bow_tilt).epsilon(1e-15));
    CHECK(p->max_speed == q->max_speed);
  }
  const MpcConfig& m = a.mpc;
  const MpcConfig& n = b.mpc;
  CHECK(m.horizon == n.horizon);
  CHECK(m.dt == n.dt);
  CHECK(m.q1_weights == n.q1_weights);
  CHECK(m.q2_weights == n.q2_weights);
  CHECK(m.control_weights == n.control_weights);
  CHECK(m.f_min == n.f_min);
  CHECK(m.f_max == n.f_max);
  CHECK(m.df_min == n.df_min);
  CHECK(m.df_max == n.df_max);
  CHECK(m.d_min == n.d_min);
  CHECK(m.v_max_1 == n.v_max_1);
  CHECK(m.v_max_2 == n.v_max_2);
  CHECK(m.slack_weight == n.slack_weight);
  CHECK(m.slack_l1_weight == n.slack_l1_weight);
  CHECK(m.max_iterations == n.max_iterations);
  CHECK(m.tolerance == n.tolerance);
  CHECK(m.time_budget_s == n.time_budget_s);
}

}  // namespace

TEST_CASE("a config survives a JSON round trip") {
  for (ControllerMode mode :
       {ControllerMode::Cooperative, ControllerMode::Baseline, ControllerMode::CooperativeNoBias}) {
    const ScenarioConfig cfg = builtin_scenario("s2", mode, ReferenceChoice::Offset60);
    check_same(parse_scenario_config(to_json_text(cfg)), cfg);
  }
  SUBCASE("explicit reference") {
    ScenarioConfig cfg = builtin_scenario("s1");
    cfg.scenario.reference = docking_reference(Vec2(1.0, 2.0), 0.7, cfg.mpc.d_min);
    cfg.reference_choice.reset();
    cfg.scenario.reference_label = "custom";
    const ScenarioConfig back = parse_scenario_config(to_json_text(cfg));
    CHECK_FALSE(back.reference_choice.has_value());
    check_same(back, cfg);
  }
}

TEST_CASE("bundled scenario files match the built-in fixtures") {
  for (const auto& id : builtin_scenario_ids()) {
    const auto path = scenario_dir() / (id + ".json");
    INFO(path.string());
    REQUIRE(std::filesystem::exists(path));
    const ScenarioConfig file = load_scenario_config(path);
    CHECK_NOTHROW(file.validate());
    check_same(file, builtin_scenario(id));
  }
}

TEST_CASE("missing keys fall back to the case study values") {
  const ScenarioConfig cfg = parse_scenario_config("{}");
  const MpcConfig ref = MpcConfig::case_study(usv1_params(), usv2_params());
  CHECK(cfg.mpc.horizon == 50);
  CHECK(cfg.mpc.dt == 0.5);
  CHECK(cfg.mpc.f_max == ref.f_max);
  CHECK(cfg.mpc.d_min == doctest::Approx(1.8));
  CHECK(cfg.scenario.usv1.mass == usv1_params().mass);
  CHECK(cfg.scenario.drag == Vec2(343.0, 704.0));
}

TEST_CASE("alpha is given in degrees, all other angles in radians") {
  const ScenarioConfig cfg = parse_scenario_config(R"({
    // comments are allowed
    "vessels": {"usv1": {"alpha_deg": 30}},
    "current": {"speed": 0.1, "heading": 1.5}
  })");
  CHECK(cfg.scenario.usv1.bow_tilt == doctest::Approx(std::numbers::pi / 6.0));
  CHECK(cfg.scenario.current_heading == 1.5);
  CHECK(usv1_params().bow_tilt == doctest::Approx(15.0 * std::numbers::pi / 180.0));
}

TEST_CASE("Qu accepts a diagonal or a full diagonal matrix") {
  const ScenarioConfig v = parse_scenario_config(R"({"mpc": {"Qu": [1,2,3,4,5,6,7,8]}})");
  CHECK(v.mpc.control_weights(7) == 8.0);
  std::ostringstream m;
  m << R"({"mpc": {"Qu": [)";
  for (int i = 0; i < 8; ++i) {
    m << (i ? "," : "") << "[";
    for (int j = 0; j < 8; ++j) m << (j ? "," : "") << (i == j ? i + 1 : 0);
    m << "]";
  }
  m << "]}}";
  CHECK(parse_scenario_config(m.str()).mpc.control_weights == v.mpc.control_weights);
  CHECK_THROWS_AS(parse_scenario_config(R"({"mpc": {"Qu": [1,2,3]}})"), ConfigError);
}

TEST_CASE("malformed configs are rejected with ConfigError") {
  CHECK_THROWS_AS(parse_scenario_config("{"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"speed": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"mpc": {"horizon": 10}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"mode": "fast"})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"reference": "r3"})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"mpc": {"N": 0}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"mpc": {"dt": "half"}})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"seed": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"vessels": {"usv1": {"M": [[1,0],[0,1]]}}})"),
                  ConfigError);
  CHECK_THROWS_AS(parse_scenario_config(R"({"initial_state": {"usv1": [0,0,0]}})"), ConfigError);
  CHECK_THROWS_AS(load_scenario_config("/nonexistent/coopdock.json"), ConfigError);

  try {
    parse_scenario_config(R"({"mpc": {"horizon": 10}})");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("horizon") != std::string::npos);
  }
}

TEST_CASE("a reference closer than d_min parses but fails validation") {
  const ScenarioConfig cfg = parse_scenario_config(R"({
    "reference": {"usv1": [0.5, 0, 0], "usv2": [-0.5, 0, 3.141592653589793]}
  })");
  CHECK_FALSE(cfg.reference_choice.has_value());
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
