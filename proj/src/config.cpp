#include "coopdock/config.hpp"

#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

namespace coopdock {

namespace {

using nlohmann::json;

constexpr double kDeg = std::numbers::pi / 180.0;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!keys.contains(item.key())) fail(where, "unknown key '" + item.key() + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) fail(where, "expected a number");
  return j.get<double>();
}

template <int N>
Eigen::Matrix<double, N, 1> vector(const json& j, const std::string& where) {
  if (!j.is_array() || static_cast<int>(j.size()) != N) {
    fail(where, "expected an array of " + std::to_string(N) + " numbers");
  }
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v(i) = number(j[i], where);
  return v;
}

Mat3 matrix3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) fail(where, "expected a 3x3 row-major array");
  Mat3 m;
  for (int r = 0; r < 3; ++r) m.row(r) = vector<3>(j[r], where).transpose();
  return m;
}

// Weights given either as a vector of diagonal entries or as a diagonal matrix.
template <int N>
Eigen::Matrix<double, N, 1> diagonal_weights(const json& j, const std::string& where) {
  if (j.is_array() && !j.empty() && j[0].is_array()) {
    if (static_cast<int>(j.size()) != N) fail(where, "expected a square matrix");
    Eigen::Matrix<double, N, 1> d;
    for (int r = 0; r < N; ++r) {
      const auto row = vector<N>(j[r], where);
      for (int c = 0; c < N; ++c) {
        if (c != r && row(c) != 0.0) fail(where, "only diagonal weight matrices are supported");
      }
      d(r) = row(r);
    }
    return d;
  }
  return vector<N>(j, where);
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const std::string at = where + "." + key;
  if constexpr (std::is_same_v<T, double>) {
    out = number(obj.at(key), at);
  } else if constexpr (std::is_same_v<T, int>) {
    if (!obj.at(key).is_number_integer()) fail(at, "expected an integer");
    out = obj.at(key).get<int>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!obj.at(key).is_boolean()) fail(at, "expected true or false");
    out = obj.at(key).get<bool>();
  } else if constexpr (std::is_same_v<T, Mat3>) {
    out = matrix3(obj.at(key), at);
  } else {
    out = vector<T::RowsAtCompileTime>(obj.at(key), at);
  }
}

void read_vessel(const json& j, VesselParams& p, const std::string& where) {
  check_keys(j, where, {"M", "D_L", "d", "w", "alpha_deg", "v_max"});
  read(j, "M", p.mass, where);
  read(j, "D_L", p.damping, where);
  read(j, "d", p.length, where);
  read(j, "w", p.width, where);
  if (j.contains("alpha_deg")) p.bow_tilt = number(j.at("alpha_deg"), where + ".alpha_deg") * kDeg;
  read(j, "v_max", p.max_speed, where);
}

json vessel_json(const VesselParams& p) {
  auto rows = [](const Mat3& m) {
    json a = json::array();
    for (int r = 0; r < 3; ++r) a.push_back({m(r, 0), m(r, 1), m(r, 2)});
    return a;
  };
  json j = {{"M", rows(p.mass)}, {"D_L", rows(p.damping)}, {"d", p.length}, {"w", p.width},
            {"v_max", p.max_speed}};
  if (p.layout == ThrusterLayout::FixedQuad) j["alpha_deg"] = p.bow_tilt / kDeg;
  return j;
}

template <typename Derived>
json array_json(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

ScenarioConfig parse_scenario_config(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text.begin(), json_text.end(), nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"id", "seed", "duration_steps", "mode", "reference", "current", "drag",
                              "initial_state", "vessels", "mpc", "observer", "plant", "docking"});

  ScenarioConfig cfg;
  Scenario& s = cfg.scenario;
  if (root.contains("id")) {
    if (!root["id"].is_string()) fail("config.id", "expected a string");
    s.id = root["id"].get<std::string>();
  }
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned()) fail("config.seed", "expected a non-negative integer");
    s.seed = root["seed"].get<std::uint64_t>();
  }
  read(root, "duration_steps", s.duration_steps, "config");
  if (root.contains("mode")) {
    const auto mode = root["mode"].is_string()
                          ? controller_mode_from_string(root["mode"].get<std::string>())
                          : std::nullopt;
    if (!mode) fail("config.mode", "expected one of coop, baseline, coop-nobias");
    s.mode = *mode;
  }

  if (root.contains("vessels")) {
    const json& v = root["vessels"];
    check_keys(v, "config.vessels", {"usv1", "usv2"});
    if (v.contains("usv1")) read_vessel(v["usv1"], s.usv1, "config.vessels.usv1");
    if (v.contains("usv2")) read_vessel(v["usv2"], s.usv2, "config.vessels.usv2");
  }
  try {
    s.usv1.validate();
    s.usv2.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config.vessels: ") + e.what());
  }

  // Controller defaults depend on the hulls (d_min, speed limits).
  MpcConfig& m = cfg.mpc;
  m = MpcConfig::case_study(s.usv1, s.usv2);
  if (root.contains("mpc")) {
    const json& j = root["mpc"];
    const std::string w = "config.mpc";
    check_keys(j, w, {"N", "dt", "Q1", "Q2", "Qu", "F_min", "F_max", "dF_min", "dF_max", "d_min",
                      "v_max_1", "v_max_2", "slack_weight", "slack_l1_weight", "max_iterations", "tolerance",
                      "time_budget_s"});
    read(j, "N", m.horizon, w);
    read(j, "dt", m.dt, w);
    if (j.contains("Q1")) m.q1_weights = diagonal_weights<3>(j["Q1"], w + ".Q1");
    if (j.contains("Q2")) m.q2_weights = diagonal_weights<3>(j["Q2"], w + ".Q2");
    if (j.contains("Qu")) m.control_weights = diagonal_weights<8>(j["Qu"], w + ".Qu");
    read(j, "F_min", m.f_min, w);
    read(j, "F_max", m.f_max, w);
    read(j, "dF_min", m.df_min, w);
    read(j, "dF_max", m.df_max, w);
    read(j, "d_min", m.d_min, w);
    read(j, "v_max_1", m.v_max_1, w);
    read(j, "v_max_2", m.v_max_2, w);
    read(j, "slack_weight", m.slack_weight, w);
    read(j, "slack_l1_weight", m.slack_l1_weight, w);
    read(j, "max_iterations", m.max_iterations, w);
    read(j, "tolerance", m.tolerance, w);
    read(j, "time_budget_s", m.time_budget_s, w);
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  if (root.contains("current")) {
    check_keys(root["current"], "config.current", {"speed", "heading"});
    read(root["current"], "speed", s.current_speed, "config.current");
    read(root["current"], "heading", s.current_heading, "config.current");
  }
  s.drag = Vec2(s.usv1.damping(0, 0), s.usv2.damping(0, 0));
  read(root, "drag", s.drag, "config");

  if (root.contains("initial_state")) {
    const json& j = root["initial_state"];
    check_keys(j, "config.initial_state", {"usv1", "usv2"});
    Vec6 q1 = s.q_init.head<6>();
    Vec6 q2 = s.q_init.tail<6>();
    read(j, "usv1", q1, "config.initial_state");
    read(j, "usv2", q2, "config.initial_state");
    s.q_init << q1, q2;
  }

  if (root.contains("observer")) {
    const json& j = root["observer"];
    const std::string w = "config.observer";
    check_keys(j, w, {"sigma_position", "sigma_heading", "sigma_velocity", "sigma_yaw_rate",
                      "process_pose", "process_velocity", "process_bias", "initial_bias_variance",
                      "measurement_noise"});
    ObserverConfig& o = s.observer;
    read(j, "sigma_position", o.sigma_position, w);
    read(j, "sigma_heading", o.sigma_heading, w);
    read(j, "sigma_velocity", o.sigma_velocity, w);
    read(j, "sigma_yaw_rate", o.sigma_yaw_rate, w);
    read(j, "process_pose", o.process_pose, w);
    read(j, "process_velocity", o.process_velocity, w);
    read(j, "process_bias", o.process_bias, w);
    read(j, "initial_bias_variance", o.initial_bias_variance, w);
    read(j, "measurement_noise", s.measurement_noise, w);
  }

  if (root.contains("plant")) {
    const json& j = root["plant"];
    check_keys(j, "config.plant", {"fidelity", "substeps"});
    if (j.contains("fidelity")) {
      const std::string f = j["fidelity"].is_string() ? j["fidelity"].get<std::string>() : "";
      if (f == "linear") {
        s.plant_fidelity = PlantFidelity::LinearLowSpeed;
      } else if (f == "coriolis") {
        s.plant_fidelity = PlantFidelity::WithCoriolis;
      } else {
        fail("config.plant.fidelity", "expected linear or coriolis");
      }
    }
    read(j, "substeps", s.plant_substeps, "config.plant");
  }

  if (root.contains("docking")) {
    check_keys(root["docking"], "config.docking", {"position_tol", "heading_tol"});
    read(root["docking"], "position_tol", s.docking.position, "config.docking");
    read(root["docking"], "heading_tol", s.docking.heading, "config.docking");
  }

  // The reference is resolved last: derived targets depend on the initial
  // state, the current and d_min.
  const json ref = root.contains("reference") ? root["reference"] : json("r1");
  if (ref.is_string()) {
    const auto choice = reference_choice_from_string(ref.get<std::string>());
    if (!choice) fail("config.reference", "expected r1, r2 or an object with usv1/usv2 poses");
    cfg.set_reference(*choice);
  } else {
    check_keys(ref, "config.reference", {"usv1", "usv2"});
    if (!ref.contains("usv1") || !ref.contains("usv2")) {
      fail("config.reference", "both usv1 and usv2 poses are required");
    }
    s.reference.usv1 = vector<3>(ref["usv1"], "config.reference.usv1");
    s.reference.usv2 = vector<3>(ref["usv2"], "config.reference.usv2");
    s.reference_label = "custom";
    cfg.reference_choice.reset();
  }
  return cfg;
}

ScenarioConfig load_scenario_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot read config file " + path.string());
  }
  std::ostringstream text;
  text << in.rdbuf();
  return parse_scenario_config(text.str());
}

std::string to_json_text(const ScenarioConfig& config) {
  const Scenario& s = config.scenario;
  const MpcConfig& m = config.mpc;
  const ObserverConfig& o = s.observer;
  json j;
  j["id"] = s.id;
  j["seed"] = s.seed;
  j["duration_steps"] = s.duration_steps;
  j["mode"] = std::string(to_string(s.mode));
  if (config.reference_choice) {
    j["reference"] = std::string(to_string(*config.reference_choice));
  } else {
    j["reference"] = {{"usv1", array_json(s.reference.usv1)}, {"usv2", array_json(s.reference.usv2)}};
  }
  j["current"] = {{"speed", s.current_speed}, {"heading", s.current_heading}};
  j["drag"] = array_json(s.drag);
  j["initial_state"] = {{"usv1", array_json(s.q_init.head<6>())},
                        {"usv2", array_json(s.q_init.tail<6>())}};
  j["vessels"] = {{"usv1", vessel_json(s.usv1)}, {"usv2", vessel_json(s.usv2)}};
  j["mpc"] = {{"N", m.horizon},
              {"dt", m.dt},
              {"Q1", array_json(m.q1_weights)},
              {"Q2", array_json(m.q2_weights)},
              {"Qu", array_json(m.control_weights)},
              {"F_min", array_json(m.f_min)},
              {"F_max", array_json(m.f_max)},
              {"dF_min", array_json(m.df_min)},
              {"dF_max", array_json(m.df_max)},
              {"d_min", m.d_min},
              {"v_max_1", m.v_max_1},
              {"v_max_2", m.v_max_2},
              {"slack_weight", m.slack_weight},
              {"slack_l1_weight", m.slack_l1_weight},
              {"max_iterations", m.max_iterations},
              {"tolerance", m.tolerance},
              {"time_budget_s", m.time_budget_s}};
  j["observer"] = {{"sigma_position", o.sigma_position},
                   {"sigma_heading", o.sigma_heading},
                   {"sigma_velocity", o.sigma_velocity},
                   {"sigma_yaw_rate", o.sigma_yaw_rate},
                   {"process_pose", o.process_pose},
                   {"process_velocity", o.process_velocity},
                   {"process_bias", o.process_bias},
                   {"initial_bias_variance", o.initial_bias_variance},
                   {"measurement_noise", s.measurement_noise}};
  j["plant"] = {{"fidelity", s.plant_fidelity == PlantFidelity::WithCoriolis ? "coriolis" : "linear"},
                {"substeps", s.plant_substeps}};
  j["docking"] = {{"position_tol", s.docking.position}, {"heading_tol", s.docking.heading}};
  return j.dump(2) + "\n";
}

}  // namespace coopdock
