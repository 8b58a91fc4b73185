// End-to-end exercises of the command line tool: spawn the real binary and
// check exit codes, file outputs, and determinism.

#include "vinetraj/io.hpp"

#include <gtest/gtest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace {

namespace fs = std::filesystem;
using vinetraj::Control;
using vinetraj::kDt;

int run_cli(const std::string& args, const std::string& env_prefix = "") {
  std::string cmd;
  if (!env_prefix.empty()) cmd += env_prefix + " ";
  cmd += "\"";
  cmd += VINETRAJ_CLI_PATH;
  cmd += "\" " + args + " >/dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::path(testing::TempDir()) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

TEST(Usage, BadInvocationsExitTwo) {
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("gen-data --bogus-flag 1"), 2);
  EXPECT_EQ(run_cli("fit"), 2);  // --logs is required
}

TEST(GenData, WritesALogWithSidecarAndIsDeterministic) {
  const fs::path a = temp_dir("cli_gen_a");
  const fs::path b = temp_dir("cli_gen_b");
  const fs::path c = temp_dir("cli_gen_c");
  ASSERT_EQ(run_cli("gen-data --config ES --script pretzel --seed 5 --out " + q(a)), 0);
  ASSERT_EQ(run_cli("gen-data --config ES --script pretzel --seed 5 --out " + q(b)), 0);
  ASSERT_EQ(run_cli("gen-data --config ES --script pretzel --seed 6 --out " + q(c)), 0);

  const fs::path csv = a / "ES_pretzel_seed5.csv";
  ASSERT_TRUE(fs::exists(csv));
  ASSERT_TRUE(fs::exists(a / "ES_pretzel_seed5.meta.json"));
  const std::string text = vinetraj::io::read_file(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 601);  // header + 600 rows

  EXPECT_EQ(vinetraj::io::read_file(b / "ES_pretzel_seed5.csv"), text);
  EXPECT_NE(vinetraj::io::read_file(c / "ES_pretzel_seed6.csv"), text);

  const auto meta = vinetraj::io::read_log_meta(a / "ES_pretzel_seed5.meta.json");
  EXPECT_EQ(meta.seed, 5u);
  EXPECT_EQ(meta.script, "pretzel");
  EXPECT_EQ(meta.cfg.pressure_kpa, 0.0);
  EXPECT_EQ(meta.cfg.length_m, 0.7);
}

TEST(GenData, SeedFallsBackToTheEnvironment) {
  const fs::path a = temp_dir("cli_env_a");
  const fs::path b = temp_dir("cli_env_b");
  ASSERT_EQ(run_cli("gen-data --config IS --script pretzel --out " + q(a),
                    "VINETRAJ_SEED=7"),
            0);
  ASSERT_EQ(run_cli("gen-data --config IS --script pretzel --seed 7 --out " + q(b)), 0);
  EXPECT_EQ(vinetraj::io::read_file(a / "IS_pretzel_seed7.csv"),
            vinetraj::io::read_file(b / "IS_pretzel_seed7.csv"));
}

TEST(GenData, RejectsUnknownConfigsAndScripts) {
  const fs::path dir = temp_dir("cli_gen_bad");
  EXPECT_EQ(run_cli("gen-data --config XX --script pretzel --out " + q(dir)), 2);
  EXPECT_EQ(run_cli("gen-data --config 0.7,0.4 --script pretzel --out " + q(dir)), 2);
  EXPECT_EQ(run_cli("gen-data --config ES --script moonwalk --out " + q(dir)), 2);
}

TEST(Fit, MissingLogsExitFive) {
  const fs::path dir = temp_dir("cli_fit_missing");
  EXPECT_EQ(run_cli("fit --logs " + q(dir / "none_*.csv") + " --out " +
                    q(dir / "m.json")),
            5);
}

TEST(Optimize, MissingCornerModelsExitFour) {
  const fs::path dir = temp_dir("cli_opt_missing");
  EXPECT_EQ(run_cli("optimize --task lemniscate --models " + q(dir) + " --out " +
                    q(dir / "run")),
            4);
}

TEST(Rollout, MissingControlsExitFive) {
  const fs::path dir = temp_dir("cli_roll_missing");
  EXPECT_EQ(run_cli("rollout --plant --controls " + q(dir / "none.csv") + " --out " +
                    q(dir / "out.csv")),
            5);
}

TEST(Rollout, ReplaysCommandsThroughThePlant) {
  const fs::path dir = temp_dir("cli_rollout");
  std::vector<Control> u(12, Control(0.1, 0.0, 1.5));
  vinetraj::io::atomic_write(dir / "u.csv", vinetraj::io::controls_to_csv(u, kDt));

  const std::string base = "rollout --plant --controls " + q(dir / "u.csv") +
                           " --config IS --seed 11 --out ";
  ASSERT_EQ(run_cli(base + q(dir / "a.csv")), 0);
  ASSERT_EQ(run_cli(base + q(dir / "b.csv")), 0);
  const auto log = vinetraj::io::read_flight_log(dir / "a.csv");
  EXPECT_EQ(log.states.size(), 12u);
  EXPECT_TRUE(fs::exists(dir / "a.meta.json"));
  EXPECT_EQ(vinetraj::io::read_file(dir / "a.csv"),
            vinetraj::io::read_file(dir / "b.csv"));

  // growth mode sweeps the configuration schedule instead of a fixed config
  ASSERT_EQ(run_cli("rollout --plant --growth --controls " + q(dir / "u.csv") +
                    " --seed 11 --out " + q(dir / "g.csv")),
            0);
  const auto meta = vinetraj::io::read_log_meta(dir / "g.meta.json");
  EXPECT_EQ(meta.schedule.size(), 12u);
}

TEST(Report, MissingRunExitFive) {
  const fs::path dir = temp_dir("cli_report_missing");
  EXPECT_EQ(run_cli("report --run " + q(dir)), 5);
}

// One full trip: generate training data, fit a model, clone it to the four
// corners, optimize a short figure eight, replay, and rebuild the report.
TEST(Pipeline, EndToEndThroughTheCli) {
  const fs::path dir = temp_dir("cli_pipeline");
  const fs::path logs = dir / "logs";
  const fs::path models = dir / "models";
  const fs::path run = dir / "run";

  const char* scripts[] = {"slow-lemniscate", "fast-lemniscate", "pretzel"};
  for (int i = 0; i < 3; ++i) {
    ASSERT_EQ(run_cli(std::string("gen-data --config ES --script ") + scripts[i] +
                      " --seed " + std::to_string(100 + i) + " --out " + q(logs)),
              0);
  }
  ASSERT_EQ(run_cli("fit --logs " + q(logs / "ES_*.csv") + " --ridge 1e-3 --out " +
                    q(models / "es.json")),
            0);

  const vinetraj::DynModel es = vinetraj::io::read_model(models / "es.json");
  EXPECT_EQ(es.feature_version, 1);
  EXPECT_EQ(es.cfg.pressure_kpa, 0.0);
  EXPECT_EQ(es.cfg.length_m, 0.7);
  const nlohmann::json j = nlohmann::json::parse(
      vinetraj::io::read_file(models / "es.json"));
  ASSERT_TRUE(j.contains("holdout_report"));
  EXPECT_LT(j["holdout_report"]["ee_rmse_m"].get<double>(), 0.05);

  // same parameters re-labeled at the other corners: interpolation at ES
  // then reduces to the fitted model, which keeps this test fast
  const std::pair<const char*, vinetraj::VineConfig> corners[] = {
      {"is.json", {0.4, 0.7}}, {"el.json", {0.0, 1.0}}, {"il.json", {0.4, 1.0}}};
  for (const auto& [name, cfg] : corners) {
    nlohmann::json jc = j;
    jc["config"] = vinetraj::io::config_to_json(cfg);
    vinetraj::io::atomic_write(models / name, jc.dump(2) + "\n");
  }

  ASSERT_EQ(run_cli("optimize --task lemniscate --T 5 --config ES --seed 3 "
                    "--models " + q(models) + " --out " + q(run)),
            0);
  for (const char* name : {"reference.csv", "model_traj.csv", "controls.csv",
                           "replay.csv", "baseline.csv", "metrics.json",
                           "trace_xy.svg"}) {
    EXPECT_TRUE(fs::exists(run / name)) << name;
  }
  const nlohmann::json metrics =
      nlohmann::json::parse(vinetraj::io::read_file(run / "metrics.json"));
  EXPECT_EQ(metrics.at("task").get<std::string>(), "lemniscate");
  EXPECT_FALSE(metrics.at("solver_failed").get<bool>());
  EXPECT_TRUE(metrics.at("mean_ee_error_m").is_number());

  EXPECT_EQ(run_cli("optimize --task juggle --models " + q(models)), 2);

  ASSERT_EQ(run_cli("report --run " + q(run)), 0);
  EXPECT_TRUE(fs::exists(run / "timeseries_x.svg"));
}

}  // namespace
