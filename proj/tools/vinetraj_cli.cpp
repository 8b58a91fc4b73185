// Command line front end: generate plant data, fit models, optimize and
// replay task trajectories, and rebuild reports from run directories.

#include "vinetraj/vinetraj.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <limits>
#include <regex>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace vinetraj;

namespace {

// Exit code contract: 2 usage, 3 fit failure, 4 missing artifact, 5 missing data.
constexpr int kExitUsage = 2;
constexpr int kExitFitFailure = 3;
constexpr int kExitMissingArtifact = 4;
constexpr int kExitMissingData = 5;

uint64_t default_seed() {
  if (const char* env = std::getenv("VINETRAJ_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "warning: ignoring non-numeric VINETRAJ_SEED\n";
    }
  }
  return 1;
}

VineConfig parse_config(const std::string& text) {
  try {
    return experiments::corner_config(text);
  } catch (const std::invalid_argument&) {
    // fall through to numeric "pressure,length"
  }
  const size_t comma = text.find(',');
  if (comma == std::string::npos) {
    throw std::invalid_argument("config must be ES/IS/EL/IL or 'pressure,length'");
  }
  VineConfig cfg;
  try {
    cfg.pressure_kpa = std::stod(text.substr(0, comma));
    cfg.length_m = std::stod(text.substr(comma + 1));
  } catch (const std::exception&) {
    throw std::invalid_argument("config must be ES/IS/EL/IL or 'pressure,length'");
  }
  if (!in_config_domain(cfg)) {
    throw std::invalid_argument(
        "config outside the valid domain: pressure in [0, 0.4] kPa, length in [0.7, 1.0] m");
  }
  return cfg;
}

std::string config_slug(const std::string& text, const VineConfig& cfg) {
  for (const char* label : experiments::kCornerLabels) {
    if (text == label) return text;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "p%g_l%g", cfg.pressure_kpa, cfg.length_m);
  return buf;
}

std::vector<fs::path> expand_glob(const std::string& pattern) {
  const fs::path pat(pattern);
  const std::string fname = pat.filename().string();
  if (fname.find('*') == std::string::npos && fname.find('?') == std::string::npos) {
    if (fs::exists(pat)) return {pat};
    return {};
  }
  std::string re;
  for (char c : fname) {
    if (c == '*') re += ".*";
    else if (c == '?') re += '.';
    else if (std::string("\\^$.|+()[]{}").find(c) != std::string::npos) {
      re += '\\';
      re += c;
    } else re += c;
  }
  const std::regex rx(re);
  const fs::path dir = pat.has_parent_path() ? pat.parent_path() : fs::path(".");
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() &&
        std::regex_match(entry.path().filename().string(), rx)) {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

int cmd_gen_data(const std::string& config_text, const std::string& script,
                 uint64_t seed, const std::string& out_dir) {
  VineConfig cfg;
  try {
    cfg = parse_config(config_text);
  } catch (const std::invalid_argument& e) {
    std::cerr << "gen-data: " << e.what() << "\n";
    return kExitUsage;
  }
  std::vector<Control> cmds;
  try {
    cmds = experiments::training_commands(script, cfg.length_m);
  } catch (const std::invalid_argument& e) {
    std::cerr << "gen-data: " << e.what() << "\n";
    return kExitUsage;
  }
  const plant::PlantParams params;
  const FlightLog log = plant::run_plant(cmds, cfg, params, seed);
  const std::string slug = config_slug(config_text, cfg);
  const fs::path csv = fs::path(out_dir) /
                       (slug + "_" + script + "_seed" + std::to_string(seed) + ".csv");
  io::write_flight_log(csv, log);
  io::LogMeta meta;
  meta.dt = log.dt;
  meta.seed = seed;
  meta.cfg = cfg;
  meta.params = params;
  meta.script = script;
  meta.label = slug;
  io::write_log_meta(io::meta_path_for(csv), meta);
  std::cout << "wrote " << csv.string() << " (" << log.states.size() << " rows)\n";
  return 0;
}

int cmd_fit(const std::vector<std::string>& log_patterns, const std::string& out_path,
            double ridge, double holdout, const std::string& config_text) {
  std::vector<fs::path> paths;
  for (const auto& pat : log_patterns) {
    for (auto& p : expand_glob(pat)) paths.push_back(p);
  }
  if (paths.empty()) {
    std::cerr << "fit: no log files match\n";
    return kExitMissingData;
  }

  std::vector<FlightLog> logs;
  bool have_cfg = false;
  VineConfig cfg;
  try {
    for (const auto& p : paths) {
      FlightLog log = io::read_flight_log(p);
      const fs::path meta_path = io::meta_path_for(p);
      if (fs::exists(meta_path)) {
        const io::LogMeta meta = io::read_log_meta(meta_path);
        log.cfg = meta.cfg;
        if (have_cfg && (cfg.pressure_kpa != meta.cfg.pressure_kpa ||
                         cfg.length_m != meta.cfg.length_m)) {
          std::cerr << "fit: logs were recorded at different configurations\n";
          return kExitUsage;
        }
        cfg = meta.cfg;
        have_cfg = true;
      }
      logs.push_back(std::move(log));
    }
  } catch (const std::exception& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitMissingData;
  }
  if (!config_text.empty()) {
    try {
      cfg = parse_config(config_text);
      have_cfg = true;
    } catch (const std::invalid_argument& e) {
      std::cerr << "fit: " << e.what() << "\n";
      return kExitUsage;
    }
  }
  if (!have_cfg) {
    std::cerr << "fit: no metadata sidecars found; pass --config\n";
    return kExitUsage;
  }

  try {
    std::vector<FlightLog> train, val;
    for (const auto& log : logs) {
      const size_t n = log.states.size();
      const size_t keep = holdout > 0.0
                              ? n - static_cast<size_t>(std::floor(n * holdout))
                              : n;
      train.push_back(experiments::detail::slice_log(log, 0, keep));
      if (keep + 4 <= n) val.push_back(experiments::detail::slice_log(log, keep, n));
    }
    const DynModel model = sysid::fit_config_model(train, cfg, ridge);
    const sysid::FitReport report =
        sysid::validate(model, sysid::build_dataset(val.empty() ? train : val));
    nlohmann::json extra;
    extra[val.empty() ? "train_report" : "holdout_report"] =
        io::fit_report_to_json(report);
    io::write_model(out_path, model, extra);
    std::cout << (val.empty() ? "training" : "held-out")
              << " one-step RMSE per channel:\n";
    for (int i = 0; i < kStateDim; ++i) {
      std::cout << "  [" << i << "] " << report.one_step_rmse(i) << "\n";
    }
    std::cout << "end effector RMSE: " << report.ee_rmse
              << " m, divergence horizon: " << report.divergence_horizon
              << " steps, design condition number: " << report.condition_number
              << "\n";
    std::cout << "wrote " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "fit: " << e.what() << "\n";
    return kExitFitFailure;
  }
}

int cmd_optimize(const std::string& task, const std::string& models_dir,
                 const std::string& config_text, double period, double x_target,
                 double z_target, int n_states, uint64_t seed,
                 const std::string& out_dir) {
  CornerSet corners;
  try {
    corners.es = io::read_model(fs::path(models_dir) / "es.json");
    corners.is = io::read_model(fs::path(models_dir) / "is.json");
    corners.el = io::read_model(fs::path(models_dir) / "el.json");
    corners.il = io::read_model(fs::path(models_dir) / "il.json");
    check_corner_set(corners);
  } catch (const io::MissingFileError& e) {
    std::cerr << "optimize: " << e.what()
              << " (need es.json/is.json/el.json/il.json)\n";
    return kExitMissingArtifact;
  } catch (const std::exception& e) {
    std::cerr << "optimize: " << e.what() << "\n";
    return kExitMissingArtifact;
  }

  VineConfig cfg;
  std::string label;
  if (task != "growth") {
    try {
      cfg = parse_config(config_text.empty() ? "ES" : config_text);
      label = config_slug(config_text.empty() ? "ES" : config_text, cfg);
    } catch (const std::invalid_argument& e) {
      std::cerr << "optimize: " << e.what() << "\n";
      return kExitUsage;
    }
  }

  const plant::PlantParams params;
  experiments::RunResult result;
  if (task == "lemniscate") {
    result = experiments::run_lemniscate(corners, cfg, period, seed, params, out_dir,
                                         label);
  } else if (task == "swing") {
    result = experiments::run_swing(corners, cfg, x_target, z_target, n_states, seed,
                                    params, out_dir, label);
  } else if (task == "growth") {
    result = experiments::run_growth(corners, seed, params, out_dir);
  } else {
    std::cerr << "optimize: unknown task '" << task << "'\n";
    return kExitUsage;
  }
  std::cout << result.metrics.dump(2) << "\n";
  if (result.solver_failed) {
    std::cerr << "optimize: solver diverged\n";
    return 1;
  }
  return 0;
}

int cmd_rollout(const std::string& controls_path, const std::string& config_text,
                bool growth, uint64_t seed, const std::string& out_path) {
  std::vector<Control> cmds;
  double dt = kDt;
  try {
    std::tie(cmds, dt) = io::read_controls(controls_path);
  } catch (const std::exception& e) {
    std::cerr << "rollout: " << e.what() << "\n";
    return kExitMissingData;
  }
  const plant::PlantParams params;
  FlightLog log;
  io::LogMeta meta;
  meta.seed = seed;
  meta.params = params;
  try {
    if (growth) {
      const auto schedule = reference::growth_schedule(static_cast<int>(cmds.size()), dt);
      log = plant::run_plant(cmds, schedule, params, seed, dt);
      meta.cfg = schedule.front();
      meta.schedule = schedule;
    } else {
      const VineConfig cfg = parse_config(config_text.empty() ? "ES" : config_text);
      log = plant::run_plant(cmds, cfg, params, seed, dt);
      meta.cfg = cfg;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "rollout: " << e.what() << "\n";
    return kExitUsage;
  }
  meta.dt = log.dt;
  io::write_flight_log(out_path, log);
  io::write_log_meta(io::meta_path_for(out_path), meta);
  std::cout << "wrote " << out_path << " (" << log.states.size() << " rows)\n";
  return 0;
}

int cmd_report(const std::string& run_dir) {
  try {
    const nlohmann::json metrics = experiments::report_run(run_dir);
    std::cout << metrics.dump(2) << "\n";
    return 0;
  } catch (const io::MissingFileError& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kExitMissingData;
  } catch (const std::exception& e) {
    std::cerr << "report: " << e.what() << "\n";
    return kExitMissingData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modeling and trajectory optimization for a quadrotor with a "
               "soft growing arm, against a synthetic plant"};
  app.require_subcommand(1);

  uint64_t seed = default_seed();

  auto* gen = app.add_subcommand("gen-data", "Run a training script on the plant");
  std::string gen_config = "ES", gen_script = "slow-lemniscate", gen_out = ".";
  gen->add_option("--config", gen_config, "corner label (ES/IS/EL/IL) or 'pressure,length'");
  gen->add_option("--script", gen_script, "slow-lemniscate | fast-lemniscate | pretzel");
  gen->add_option("--seed", seed, "RNG seed");
  gen->add_option("--out", gen_out, "output directory");

  auto* fit = app.add_subcommand("fit", "Fit a model from flight logs");
  std::vector<std::string> fit_logs;
  std::string fit_out = "model.json", fit_config;
  double fit_ridge = sysid::kDefaultRidge, fit_holdout = 0.2;
  fit->add_option("--logs", fit_logs, "log CSV paths or globs")->required();
  fit->add_option("--out", fit_out, "output model JSON path");
  fit->add_option("--ridge", fit_ridge, "ridge regularization strength");
  fit->add_option("--holdout", fit_holdout, "final fraction of each log held out");
  fit->add_option("--config", fit_config, "override configuration (else from sidecars)");

  auto* opt = app.add_subcommand("optimize", "Optimize a task and replay on the plant");
  std::string opt_task, opt_models = ".", opt_config, opt_out = "run";
  double opt_period = 10.0, opt_xt = 1.0;
  double opt_zt = std::numeric_limits<double>::quiet_NaN();
  int opt_states = 150;
  opt->add_option("--task", opt_task, "lemniscate | swing | growth")->required();
  opt->add_option("--models", opt_models, "directory with es/is/el/il.json");
  opt->add_option("--config", opt_config, "corner label or 'pressure,length'");
  opt->add_option("--T", opt_period, "lemniscate lap period [s]");
  opt->add_option("--x-target", opt_xt, "swing target x [m]");
  opt->add_option("--z-target", opt_zt,
                  "swing target z [m] (default: 0.3 above the resting tip height)");
  opt->add_option("--states", opt_states, "swing horizon length in states");
  opt->add_option("--seed", seed, "RNG seed for the plant replay");
  opt->add_option("--out", opt_out, "run output directory");

  auto* roll = app.add_subcommand("rollout", "Replay a command CSV");
  std::string roll_controls, roll_config, roll_out = "rollout.csv";
  bool roll_plant = false, roll_growth = false;
  roll->add_flag("--plant", roll_plant, "replay through the synthetic plant");
  roll->add_option("--controls", roll_controls, "controls CSV (or full log)")->required();
  roll->add_option("--config", roll_config, "corner label or 'pressure,length'");
  roll->add_flag("--growth", roll_growth, "use the growth configuration schedule");
  roll->add_option("--seed", seed, "RNG seed");
  roll->add_option("--out", roll_out, "output log CSV path");

  auto* rep = app.add_subcommand("report", "Rebuild metrics and plots for a run");
  std::string rep_run;
  rep->add_option("--run", rep_run, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_config, gen_script, seed, gen_out);
    if (*fit) return cmd_fit(fit_logs, fit_out, fit_ridge, fit_holdout, fit_config);
    if (*opt) {
      return cmd_optimize(opt_task, opt_models, opt_config, opt_period, opt_xt,
                          opt_zt, opt_states, seed, opt_out);
    }
    if (*roll) return cmd_rollout(roll_controls, roll_config, roll_growth, seed, roll_out);
    if (*rep) return cmd_report(rep_run);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}
