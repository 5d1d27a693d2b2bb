#include "coopdock/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "coopdock/config.hpp"
#include "coopdock/run_log_io.hpp"

namespace coopdock {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::ios_base::failure("cannot open " + path.string() + " for writing");
  }
  out << text;
  out.close();
  if (!out) {
    throw std::ios_base::failure("failed writing " + path.string());
  }
}

std::string fixed(double v, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

// Overrides shared by run, compare and demo.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::string> ref;
  std::optional<int> steps;
};

void add_overrides(CLI::App* app, Overrides& o, bool mode_and_ref) {
  app->add_option("--seed", o.seed, "RNG seed, overrides the config");
  if (mode_and_ref) {
    app->add_option("--mode", o.mode, "Controller mode")
        ->check(CLI::IsMember({"coop", "baseline", "coop-nobias"}));
    app->add_option("--ref", o.ref, "Docking reference derived from the current")
        ->check(CLI::IsMember({"r1", "r2"}));
  }
  app->add_option("--steps", o.steps, "Number of control steps, overrides the config")
      ->check(CLI::PositiveNumber);
}

void apply(const Overrides& o, ScenarioConfig& cfg) {
  if (o.seed) cfg.scenario.seed = *o.seed;
  if (o.mode) cfg.scenario.mode = *controller_mode_from_string(*o.mode);
  if (o.ref) cfg.set_reference(*reference_choice_from_string(*o.ref));
  if (o.steps) cfg.scenario.duration_steps = *o.steps;
}

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void validate_or_throw(const ScenarioConfig& cfg) {
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

}  // namespace

RunArtifacts execute_run(const ScenarioConfig& config, const fs::path& out_dir,
                         const RunSettings& settings, std::ostream& progress) {
  RunOptions options;
  options.record_solve_time = settings.record_solve_time;
  const int total = config.scenario.duration_steps;
  if (!settings.quiet) {
    options.progress = [&progress, total](int k, const StepRecord& r) {
      const double dist = (r.q.segment<2>(0) - r.q.segment<2>(6)).norm();
      progress << "step " << (k + 1) << "/" << total << " t=" << fixed(r.time, 1)
               << "s status=" << to_string(r.status) << " iter=" << r.iterations
               << " dist=" << fixed(dist, 3) << "m" << (r.fallback ? " fallback" : "") << "\n";
    };
  }
  RunArtifacts art;
  art.log = run_closed_loop(config.scenario, config.mpc, options);

  fs::create_directories(out_dir);
  art.csv = out_dir / "run.csv";
  art.metrics = out_dir / "metrics.json";
  const std::string csv = run_csv_text(art.log);
  write_file(art.csv, csv);

  // Metrics come from the log as it reads back from disk.
  RunLog parsed = art.log;
  std::istringstream in(csv);
  parsed.records = read_run_csv(in);
  if (parsed.records.empty()) {
    art.metrics_value.scenario_id = art.log.scenario_id;
    art.metrics_value.mode = std::string(to_string(art.log.mode));
    art.metrics_value.reference_label = art.log.reference_label;
  } else {
    art.metrics_value = compute_metrics(parsed, config.mpc, config.scenario.docking);
  }
  write_file(art.metrics, metrics_json_text(art.metrics_value, config, art.log));
  return art;
}

void assign_relative_gains(std::vector<ComparisonRow>& rows,
                           const std::optional<std::string>& baseline_label) {
  for (ComparisonRow& row : rows) {
    const ComparisonRow* base = nullptr;
    for (const ComparisonRow& other : rows) {
      const bool match = baseline_label ? other.label == *baseline_label
                                        : other.metrics.mode == "baseline" &&
                                              other.metrics.scenario_id == row.metrics.scenario_id;
      if (match) {
        base = &other;
        break;
      }
    }
    row.metrics.delta_j_rel.reset();
    if (base && base->metrics.j_tilde > 0.0) {
      row.metrics.delta_j_rel = relative_gain(base->metrics.j_tilde, row.metrics.j_tilde);
    }
  }
}

std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << "label,scenario_id,mode,reference,delta_J_rel_percent,J_tilde,l1,l2,docking_time_s,"
         "min_distance\n";
  char buf[64];
  auto g = [&buf](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  for (const ComparisonRow& r : rows) {
    const Metrics& m = r.metrics;
    out << r.label << ',' << m.scenario_id << ',' << m.mode << ',' << m.reference_label << ','
        << (m.delta_j_rel ? g(100.0 * *m.delta_j_rel) : "") << ',' << g(m.j_tilde) << ','
        << g(m.l1) << ',' << g(m.l2) << ',' << (m.docking_time ? g(*m.docking_time) : "") << ','
        << g(m.min_distance) << '\n';
  }
  return out.str();
}

std::string comparison_table(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(28) << "run" << std::right << std::setw(10) << "dJ [%]"
      << std::setw(10) << "l1 [m]" << std::setw(10) << "l2 [m]" << std::setw(10) << "T [s]"
      << std::setw(16) << "J" << '\n';
  for (const ComparisonRow& r : rows) {
    const Metrics& m = r.metrics;
    out << std::left << std::setw(28) << r.label << std::right << std::setw(10)
        << (m.delta_j_rel ? fixed(100.0 * *m.delta_j_rel, 2) : "n/a") << std::setw(10)
        << fixed(m.l1, 2) << std::setw(10) << fixed(m.l2, 2) << std::setw(10)
        << (m.docking_time ? fixed(*m.docking_time, 1) : "--") << std::setw(16)
        << fixed(m.j_tilde, 1) << '\n';
  }
  return out.str();
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cooperative NMPC docking of two surface vessels"};
  app.name("coopdock");
  app.require_subcommand(1);

  std::string config_path;
  fs::path out_dir;
  bool quiet = false;
  bool record_timing = false;

  CLI::App* run = app.add_subcommand("run", "Simulate one scenario config");
  Overrides run_over;
  run->add_option("--config", config_path, "Scenario config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory for run.csv and metrics.json")->required();
  add_overrides(run, run_over, true);
  run->add_flag("--quiet", quiet, "No per-step progress on stderr");
  run->add_flag("--record-timing", record_timing, "Write wall-clock solve times (not reproducible)");

  CLI::App* compare = app.add_subcommand("compare", "Run several configs and tabulate the metrics");
  std::vector<std::string> compare_paths;
  std::optional<std::string> baseline_label;
  bool sweep = false;
  Overrides cmp_over;
  compare->add_option("--config", compare_paths, "Scenario configs (repeatable)")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--baseline", baseline_label, "Run label used as the baseline for dJ");
  compare->add_flag("--sweep", sweep,
                    "Expand every config into baseline, coop r1, coop r2 and coop-nobias r1");
  add_overrides(compare, cmp_over, false);
  compare->add_flag("--quiet", quiet, "No per-step progress on stderr");

  CLI::App* validate = app.add_subcommand("validate", "Check a config without simulating");
  validate->add_option("--config", config_path, "Scenario config (JSON)")->required();

  CLI::App* demo = app.add_subcommand("demo", "Run a bundled scenario");
  std::string demo_id;
  Overrides demo_over;
  demo->add_option("id", demo_id, "Scenario id")->required()->check(CLI::IsMember({"s1", "s2"}));
  demo->add_option("--out", out_dir, "Output directory (default demo_<id>)");
  add_overrides(demo, demo_over, true);
  demo->add_flag("--quiet", quiet, "No per-step progress on stderr");
  demo->add_flag("--record-timing", record_timing, "Write wall-clock solve times (not reproducible)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfigError;
  }

  try {
    if (*validate) {
      const ScenarioConfig cfg = load_scenario_config(config_path);
      validate_or_throw(cfg);
      out << "config ok: " << config_path << "\n";
      return kExitOk;
    }

    if (*run || *demo) {
      ScenarioConfig cfg;
      if (*run) {
        cfg = load_scenario_config(config_path);
        apply(run_over, cfg);
      } else {
        cfg = builtin_scenario(demo_id);
        apply(demo_over, cfg);
        if (out_dir.empty()) out_dir = "demo_" + demo_id;
      }
      validate_or_throw(cfg);
      const RunArtifacts art = execute_run(cfg, out_dir, RunSettings{quiet, record_timing}, err);
      const Metrics& m = art.metrics_value;
      out << run_label(cfg) << ": J=" << fixed(m.j_tilde, 3) << " T="
          << (m.docking_time ? fixed(*m.docking_time, 1) + "s" : std::string("--"))
          << " l1=" << fixed(m.l1, 2) << "m l2=" << fixed(m.l2, 2) << "m min_dist="
          << fixed(m.min_distance, 4) << "m\n";
      out << "wrote " << art.csv.string() << " and " << art.metrics.string() << "\n";
      if (art.log.aborted) {
        err << "error: " << art.log.error << " (partial log written)\n";
        return kExitSolverFailure;
      }
      return kExitOk;
    }

    if (*compare) {
      std::vector<ScenarioConfig> configs;
      for (const std::string& path : compare_paths) {
        ScenarioConfig cfg = load_scenario_config(path);
        apply(cmp_over, cfg);
        if (sweep) {
          for (const ScenarioConfig& c : evaluation_sweep(cfg)) configs.push_back(c);
        } else {
          configs.push_back(cfg);
        }
      }
      for (const ScenarioConfig& cfg : configs) validate_or_throw(cfg);

      std::vector<ComparisonRow> rows;
      bool aborted = false;
      for (const ScenarioConfig& cfg : configs) {
        std::string label = run_label(cfg);
        for (int dup = 2; std::any_of(rows.begin(), rows.end(),
                                      [&](const ComparisonRow& r) { return r.label == label; });
             ++dup) {
          label = run_label(cfg) + "_" + std::to_string(dup);
        }
        if (!quiet) err << "running " << label << "\n";
        const RunArtifacts art = execute_run(cfg, out_dir / label, RunSettings{quiet, false}, err);
        if (art.log.aborted) {
          err << "error in " << label << ": " << art.log.error << " (partial log written)\n";
          aborted = true;
        }
        rows.push_back({label, art.metrics_value});
      }
      assign_relative_gains(rows, baseline_label);
      write_file(out_dir / "comparison.csv", comparison_csv(rows));
      out << comparison_table(rows);
      return aborted ? kExitSolverFailure : kExitOk;
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ValidationError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::ios_base::failure& e) {
    err << "i/o error: " << e.what() << "\n";
    return kExitIoError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitOk;
}

}  // namespace coopdock
