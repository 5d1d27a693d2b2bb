#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "coopdock/cli.hpp"
#include "coopdock/config.hpp"
#include "coopdock/run_log_io.hpp"

using namespace coopdock;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli(std::vector<std::string> args) {
  args.insert(args.begin(), "coopdock");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("coopdock_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scenario_dir() {
  const char* dir = std::getenv("COOPDOCK_SCENARIO_DIR");
  return dir ? fs::path(dir) : fs::path("scenarios");
}

}  // namespace

TEST_CASE("help and usage errors") {
  const CliResult help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("demo") != std::string::npos);
  CHECK(help.out.find("compare") != std::string::npos);

  CHECK(cli({}).code == kExitConfigError);
  CHECK(cli({"run", "--bogus"}).code == kExitConfigError);
  CHECK(cli({"demo", "s7"}).code == kExitConfigError);
  CHECK(cli({"demo", "s1", "--mode", "fast"}).code == kExitConfigError);
  CHECK(cli({"demo", "s1", "--steps", "0"}).code == kExitConfigError);
}

TEST_CASE("validate") {
  const fs::path dir = scratch("validate");
  for (const auto& id : builtin_scenario_ids()) {
    const CliResult ok = cli({"validate", "--config", (scenario_dir() / (id + ".json")).string()});
    CHECK(ok.code == 0);
    CHECK(ok.out.find("config ok") != std::string::npos);
  }

  // A docking reference 1.0 m apart violates d_min = 1.8 m.
  const fs::path close = dir / "close.json";
  std::ofstream(close) << R"({"reference": {"usv1": [0.5, 0, 0], "usv2": [-0.5, 0, 3.141592653589793]}})";
  const CliResult bad = cli({"validate", "--config", close.string()});
  CHECK(bad.code == kExitConfigError);
  CHECK(bad.err.find("config error") != std::string::npos);

  const fs::path broken = dir / "broken.json";
  std::ofstream(broken) << R"({"mpc": {"N": )";
  CHECK(cli({"validate", "--config", broken.string()}).code == kExitConfigError);
  CHECK(cli({"validate", "--config", (dir / "missing.json").string()}).code == kExitConfigError);
}

TEST_CASE("demo output is byte-identical across runs") {
  const fs::path a = scratch("demo_a");
  const fs::path b = scratch("demo_b");
  const CliResult ra = cli({"demo", "s1", "--steps", "4", "--quiet", "--out", a.string()});
  const CliResult rb = cli({"demo", "s1", "--steps", "4", "--quiet", "--out", b.string()});
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(ra.err.empty());
  CHECK(slurp(a / "run.csv") == slurp(b / "run.csv"));
  CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));
  CHECK(ra.out.substr(0, ra.out.find('\n')) == rb.out.substr(0, rb.out.find('\n')));
}

TEST_CASE("run writes a CSV whose metrics match metrics.json") {
  const fs::path dir = scratch("run");
  const fs::path cfg_path = dir / "cfg.json";
  ScenarioConfig cfg = builtin_scenario("s2", ControllerMode::Cooperative, ReferenceChoice::Offset60);
  cfg.scenario.duration_steps = 5;
  cfg.mpc.horizon = 10;
  std::ofstream(cfg_path) << to_json_text(cfg);

  const CliResult r = cli({"run", "--config", cfg_path.string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  CHECK_FALSE(r.err.empty());  // progress is reported unless --quiet

  std::ifstream csv(dir / "out" / "run.csv");
  RunLog log;
  log.records = read_run_csv(csv);
  REQUIRE(log.records.size() == 6u);
  log.dt = cfg.mpc.dt;
  log.reference = cfg.scenario.reference;

  const nlohmann::json m = nlohmann::json::parse(slurp(dir / "out" / "metrics.json"));
  const Metrics expected = compute_metrics(log, cfg.mpc, cfg.scenario.docking);
  CHECK(m["J_tilde"].get<double>() == doctest::Approx(expected.j_tilde).epsilon(1e-12));
  CHECK(m["l1"].get<double>() == doctest::Approx(expected.l1).epsilon(1e-12));
  CHECK(m["min_distance"].get<double>() == doctest::Approx(expected.min_distance).epsilon(1e-12));
  CHECK(m["steps"].get<int>() == 5);
  CHECK(m["mode"] == "coop");
  CHECK(m["reference_label"] == "r2");
  CHECK(m["d_min"].get<double>() == doctest::Approx(1.8));
  CHECK(m["reference"]["usv1"].size() == 3u);
  CHECK(m["aborted"] == false);

  // The CSV header is the documented column list.
  std::ifstream again(dir / "out" / "run.csv");
  std::string header;
  std::getline(again, header);
  CHECK(header.rfind("time_s,x1,y1,psi1,u1,v1,w1,x2,y2,psi2,u2,v2,w2,u0,", 0) == 0);
}

TEST_CASE("compare fills the relative gain against the baseline row") {
  const fs::path dir = scratch("compare");
  const fs::path cfg_path = dir / "cfg.json";
  ScenarioConfig cfg = builtin_scenario("s1");
  cfg.mpc.horizon = 10;
  std::ofstream(cfg_path) << to_json_text(cfg);

  const CliResult r = cli({"compare", "--config", cfg_path.string(), "--sweep", "--steps", "3",
                           "--quiet", "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  std::istringstream table(slurp(dir / "out" / "comparison.csv"));
  std::string line;
  std::getline(table, line);
  CHECK(line.rfind("label,scenario_id,mode,reference,delta_J_rel_percent", 0) == 0);
  int rows = 0;
  while (std::getline(table, line)) {
    ++rows;
    if (line.rfind("s1_baseline,", 0) == 0) {
      CHECK(line.find(",baseline,") != std::string::npos);
      // Fifth field: the gain of the baseline against itself.
      std::istringstream fields(line);
      std::string f;
      for (int i = 0; i < 5; ++i) std::getline(fields, f, ',');
      CHECK(f == "0");
    }
  }
  CHECK(rows == 4);
  for (const char* label : {"s1_baseline", "s1_coop_r1", "s1_coop_r2", "s1_coop-nobias_r1"}) {
    CHECK(fs::exists(dir / "out" / label / "run.csv"));
  }
}

TEST_CASE("relative gains without a baseline stay empty") {
  std::vector<ComparisonRow> rows(2);
  rows[0].label = "a";
  rows[0].metrics.scenario_id = "x";
  rows[0].metrics.mode = "coop";
  rows[0].metrics.j_tilde = 10.0;
  rows[1].label = "b";
  rows[1].metrics.scenario_id = "x";
  rows[1].metrics.mode = "coop";
  rows[1].metrics.j_tilde = 5.0;
  assign_relative_gains(rows, std::nullopt);
  CHECK_FALSE(rows[0].metrics.delta_j_rel.has_value());
  assign_relative_gains(rows, std::string("a"));
  REQUIRE(rows[1].metrics.delta_j_rel.has_value());
  CHECK(*rows[1].metrics.delta_j_rel == doctest::Approx(0.5));
  CHECK(*rows[0].metrics.delta_j_rel == doctest::Approx(0.0));
}
