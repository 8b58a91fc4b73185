#pragma once

#include "vinetraj/io.hpp"
#include "vinetraj/model.hpp"
#include "vinetraj/plant.hpp"
#include "vinetraj/reference.hpp"
#include "vinetraj/svg.hpp"
#include "vinetraj/sysid.hpp"
#include "vinetraj/trajopt.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

namespace vinetraj::experiments {

inline constexpr std::array<const char*, 4> kCornerLabels = {"ES", "IS", "EL", "IL"};

/// The four fitted corners: Empty/Inflated x Short/Long.
inline VineConfig corner_config(const std::string& label) {
  if (label == "ES") return {kPressureMin, kLengthMin};
  if (label == "IS") return {kPressureMax, kLengthMin};
  if (label == "EL") return {kPressureMin, kLengthMax};
  if (label == "IL") return {kPressureMax, kLengthMax};
  throw std::invalid_argument("unknown corner label '" + label + "' (want ES/IS/EL/IL)");
}

inline const std::array<const char*, 3> kScriptNames = {"slow-lemniscate",
                                                        "fast-lemniscate", "pretzel"};

/// Hand-designed 30 s excitation scripts (600 commands at 20 Hz), covering
/// the xy workspace out to +-1 m at two speeds plus a multi-amplitude step
/// sequence; all three wander in z so the vertical channels are excited too.
inline std::vector<Control> training_commands(const std::string& script, double length,
                                              double dt = kDt) {
  constexpr int kCount = 600;
  std::vector<Control> u;
  u.reserve(kCount);
  const double hover = reference::kHoverZ;
  if (script == "slow-lemniscate" || script == "fast-lemniscate") {
    const bool slow = script == "slow-lemniscate";
    const double period = slow ? 10.0 : 5.0;
    const double ramp = slow ? 2.0 : 3.0;
    const double zperiod = slow ? 7.3 : 4.1;
    for (int k = 0; k < kCount; ++k) {
      const double t = k * dt;
      const double tau = reference::ramped_path_time(t, ramp);
      const Vec3 ee = reference::lemniscate_point(tau, period, length);
      const double wobble = 0.2 * std::sin(2.0 * std::numbers::pi * t / zperiod);
      u.emplace_back(ee.x(), ee.y(), hover + wobble);
    }
    return u;
  }
  if (script == "pretzel") {
    // 15 waypoint holds of 2 s each, amplitudes spanning the +-1 m box.
    static constexpr double kWp[15][3] = {
        {0.0, 0.0, 0.0},    {0.5, 0.3, 0.15},   {-0.5, -0.3, -0.15},
        {1.0, 0.5, 0.3},    {-1.0, -0.5, -0.3}, {0.3, -0.6, 0.4},
        {-0.3, 0.6, 0.0},   {0.8, -0.8, 0.15},  {-0.8, 0.8, -0.15},
        {0.6, 1.0, 0.25},   {-0.6, -1.0, -0.25}, {0.2, 0.2, 0.05},
        {-0.2, -0.2, -0.05}, {0.9, -0.2, 0.2},  {0.0, 0.0, 0.0}};
    const int hold = kCount / 15;
    for (int k = 0; k < kCount; ++k) {
      const auto& w = kWp[std::min(k / hold, 14)];
      u.emplace_back(w[0], w[1], hover + w[2]);
    }
    return u;
  }
  throw std::invalid_argument("unknown training script '" + script + "'");
}

namespace detail {

inline uint64_t derive_seed(uint64_t base, int corner, int script) {
  return base * 1000 + static_cast<uint64_t>(corner) * 10 +
         static_cast<uint64_t>(script);
}

inline FlightLog slice_log(const FlightLog& log, size_t begin, size_t end) {
  FlightLog out;
  out.dt = log.dt;
  out.cfg = log.cfg;
  out.states.assign(log.states.begin() + begin, log.states.begin() + end);
  out.controls.assign(log.controls.begin() + begin, log.controls.begin() + end);
  return out;
}

}  // namespace detail

struct CornerFit {
  CornerSet corners;
  std::array<sysid::FitReport, 4> holdout_reports;
  std::vector<std::string> warnings;
};

/// Ridge used when fitting corner models from plant logs. The quadratic
/// feature expansion of three nearly identical stacked states is severely
/// collinear, so the conditioning default is far too weak here: it lets the
/// tip-height channel memorize the training set and extrapolate wildly on
/// held-out transients. 1e-3 costs <1 mm of training RMSE and roughly
/// triples the open-loop divergence horizon.
inline constexpr double kTrainingRidge = 1e-3;

/// Collect training data at each corner config, fit, and validate on the
/// final 20% of every log (held out from the fit).
inline CornerFit fit_all_corners(uint64_t seed,
                                 const plant::PlantParams& params = {},
                                 double ridge = kTrainingRidge,
                                 const std::string& out_dir = {}) {
  CornerFit result;
  std::array<DynModel, 4> models;
  for (int ci = 0; ci < 4; ++ci) {
    const VineConfig cfg = corner_config(kCornerLabels[ci]);
    std::vector<FlightLog> train, holdout;
    for (int si = 0; si < 3; ++si) {
      const std::vector<Control> cmds = training_commands(kScriptNames[si], cfg.length_m);
      const FlightLog log =
          plant::run_plant(cmds, cfg, params, detail::derive_seed(seed, ci, si));
      const size_t split = log.states.size() - log.states.size() / 5;
      train.push_back(detail::slice_log(log, 0, split));
      holdout.push_back(detail::slice_log(log, split, log.states.size()));
    }
    models[ci] = sysid::fit_config_model(train, cfg, ridge);
    result.holdout_reports[ci] = sysid::validate(models[ci], sysid::build_dataset(holdout));
    if (result.holdout_reports[ci].ee_rmse > 0.05) {
      result.warnings.push_back(std::string(kCornerLabels[ci]) +
                                ": held-out end effector RMSE above 0.05 m");
    }
    if (!out_dir.empty()) {
      nlohmann::json extra;
      extra["holdout_report"] = io::fit_report_to_json(result.holdout_reports[ci]);
      extra["seed"] = seed;
      std::string name = kCornerLabels[ci];
      for (auto& ch : name) ch = static_cast<char>(std::tolower(ch));
      io::write_model(std::filesystem::path(out_dir) / (name + ".json"), models[ci],
                      extra);
    }
  }
  result.corners = {models[0], models[1], models[2], models[3]};
  check_corner_set(result.corners);
  return result;
}

/// Everything one task run produces: solver output, plant replay, metrics.
struct RunResult {
  std::string task;
  std::string label;
  VineConfig cfg;
  trajopt::SolveStats stats;
  Trajectory model_traj;
  reference::ReferenceSet refs;
  FlightLog replay;
  bool solver_failed = false;
  double model_vs_ref = std::numeric_limits<double>::quiet_NaN();
  double plant_vs_ref = std::numeric_limits<double>::quiet_NaN();
  double plant_vs_model = std::numeric_limits<double>::quiet_NaN();
  double baseline_vs_ref = std::numeric_limits<double>::quiet_NaN();
  double miss_distance = std::numeric_limits<double>::quiet_NaN();
  double max_bound_excursion = std::numeric_limits<double>::quiet_NaN();
  double max_height_dev = std::numeric_limits<double>::quiet_NaN();
  double qr_ref_rise = std::numeric_limits<double>::quiet_NaN();
  nlohmann::json metrics;
  std::vector<std::string> artifacts;
};

namespace detail {

inline std::vector<Vec3> ref_ee_track(const reference::ReferenceSet& refs) {
  std::vector<Vec3> out;
  out.reserve(refs.z_bar.size());
  for (const auto& z : refs.z_bar) out.emplace_back(z.segment<3>(kEePosIdx));
  return out;
}

inline std::vector<Vec3> log_ee_track(const FlightLog& log) {
  std::vector<Vec3> out;
  out.reserve(log.states.size());
  for (const auto& x : log.states) out.push_back(ee_pos(x));
  return out;
}

/// Pad a control sequence so an open-loop replay observes the state at every
/// reference step (the last command is held one extra interval).
inline std::vector<Control> replay_commands(const std::vector<Control>& u) {
  std::vector<Control> cmds = u;
  cmds.push_back(u.back());
  return cmds;
}

inline FlightLog traj_as_log(const Trajectory& traj) {
  FlightLog log;
  log.dt = traj.dt;
  for (const auto& z : traj.states) log.states.push_back(newest(z));
  log.controls = traj.controls;
  log.controls.push_back(traj.controls.back());
  return log;
}

inline FlightLog refs_as_log(const reference::ReferenceSet& refs) {
  FlightLog log;
  log.dt = refs.dt;
  for (const auto& z : refs.z_bar) log.states.push_back(newest(z));
  log.controls = refs.u_bar;
  log.controls.push_back(refs.u_bar.back());
  return log;
}

inline const char* status_name(trajopt::SolveStatus s) {
  switch (s) {
    case trajopt::SolveStatus::kConverged: return "converged";
    case trajopt::SolveStatus::kMaxIterations: return "max_iterations";
    case trajopt::SolveStatus::kDiverged: return "diverged";
  }
  return "unknown";
}

inline nlohmann::json solver_json(const trajopt::SolveStats& stats) {
  nlohmann::json j;
  j["status"] = status_name(stats.status);
  j["converged"] = stats.converged;
  j["outer_iterations"] = stats.outer_iterations;
  j["inner_iterations"] = stats.inner_iterations;
  j["final_cost"] = stats.final_cost;
  j["max_violation"] = stats.max_violation;
  return j;
}

inline void emit_plots(const std::filesystem::path& dir, RunResult& result);

inline void write_artifacts(const std::string& out_dir, RunResult& result,
                            uint64_t seed, const plant::PlantParams& params,
                            const std::vector<VineConfig>& schedule,
                            const FlightLog* baseline) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  auto emit = [&](const fs::path& p) { result.artifacts.push_back(p.string()); };

  const FlightLog ref_log = refs_as_log(result.refs);
  io::write_flight_log(dir / "reference.csv", ref_log);
  emit(dir / "reference.csv");
  if (!result.model_traj.states.empty()) {
    io::write_flight_log(dir / "model_traj.csv", traj_as_log(result.model_traj));
    emit(dir / "model_traj.csv");
    io::atomic_write(dir / "controls.csv",
                     io::controls_to_csv(result.model_traj.controls,
                                         result.model_traj.dt));
    emit(dir / "controls.csv");
  }
  if (!result.replay.states.empty()) {
    io::write_flight_log(dir / "replay.csv", result.replay);
    emit(dir / "replay.csv");
    io::LogMeta meta;
    meta.dt = result.replay.dt;
    meta.seed = seed;
    meta.cfg = result.cfg;
    meta.schedule = schedule;
    meta.params = params;
    meta.label = result.label;
    io::write_log_meta(io::meta_path_for(dir / "replay.csv"), meta);
    emit(io::meta_path_for(dir / "replay.csv"));
  }
  if (baseline != nullptr) {
    io::write_flight_log(dir / "baseline.csv", *baseline);
    emit(dir / "baseline.csv");
  }
  io::atomic_write(dir / "metrics.json", result.metrics.dump(2) + "\n");
  emit(dir / "metrics.json");
  emit_plots(dir, result);
}

inline void emit_plots(const std::filesystem::path& dir, RunResult& result) {
  auto col = [](const std::vector<Vec3>& v, int i) {
    std::vector<double> out(v.size());
    for (size_t k = 0; k < v.size(); ++k) out[k] = v[k](i);
    return out;
  };
  const std::vector<Vec3> ref_ee = ref_ee_track(result.refs);

  std::vector<svg::Series> xy;
  xy.push_back({col(ref_ee, 0), col(ref_ee, 1), "#999999", "", "reference", 1.5});
  if (!result.model_traj.states.empty()) {
    const auto mee = ee_positions(result.model_traj.states);
    xy.push_back({col(mee, 0), col(mee, 1), "#1f77b4", "6 3", "model", 1.5});
  }
  if (!result.replay.states.empty()) {
    const auto pee = log_ee_track(result.replay);
    xy.push_back({col(pee, 0), col(pee, 1), "#d62728", "", "plant", 1.5});
  }
  svg::write_line_plot(dir / "trace_xy.svg", result.task + " end effector path",
                       "x [m]", "y [m]", xy);
  result.artifacts.push_back((dir / "trace_xy.svg").string());

  std::vector<svg::Series> xz = xy;
  xz[0].y = col(ref_ee, 2);
  size_t i = 1;
  if (!result.model_traj.states.empty()) {
    xz[i].y = col(ee_positions(result.model_traj.states), 2);
    ++i;
  }
  if (!result.replay.states.empty()) xz[i].y = col(log_ee_track(result.replay), 2);
  svg::write_line_plot(dir / "trace_xz.svg", result.task + " end effector xz",
                       "x [m]", "z [m]", xz);
  result.artifacts.push_back((dir / "trace_xz.svg").string());

  if (!result.replay.states.empty()) {
    const FlightLog& log = result.replay;
    std::vector<double> t(log.states.size());
    for (size_t k = 0; k < t.size(); ++k) t[k] = k * log.dt;
    std::vector<double> cmd(t.size()), qr(t.size()), ee(t.size());
    for (size_t k = 0; k < t.size(); ++k) {
      cmd[k] = log.controls[k].x();
      qr[k] = log.states[k](kQuadPosIdx);
      ee[k] = log.states[k](kEePosIdx);
    }
    std::vector<svg::Series> ts;
    ts.push_back({t, cmd, "#555555", "2 3", "command x", 1.3});
    ts.push_back({t, qr, "#1f77b4", "7 4", "quadrotor x", 1.5});
    ts.push_back({t, ee, "#d62728", "", "end effector x", 1.7});
    svg::write_line_plot(dir / "timeseries_x.svg", result.task + " x channels",
                         "t [s]", "x [m]", ts);
    result.artifacts.push_back((dir / "timeseries_x.svg").string());
  }
}

inline nlohmann::json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace detail

/// Figure-eight tracking at one arm configuration and lap period. Solves the
/// tracking problem on the fitted model, replays the optimized commands open
/// loop on the plant, and compares against the naive "command the reference"
/// baseline under the same noise.
inline RunResult run_lemniscate(const CornerSet& corners, const VineConfig& cfg,
                                double period, uint64_t seed,
                                const plant::PlantParams& params = {},
                                const std::string& out_dir = {},
                                const std::string& label = {}) {
  check_corner_set(corners);
  const DynModel model = interpolate(corners, cfg);
  const double dt = model.dt;
  const double ramp = period <= 7.5 ? 3.0 : 2.0;
  const int n = static_cast<int>(std::lround((period + ramp / 2.0) / dt)) + 1;

  RunResult result;
  result.task = "lemniscate";
  result.label = label;
  result.cfg = cfg;
  result.refs = reference::lemniscate_reference(
      period, cfg.length_m, n, ramp, reference::default_shape_params(period), dt);

  trajopt::TrajOptProblem prob;
  prob.models = {model};
  prob.refs = result.refs;
  prob.horizon = n;
  prob.q_diag = AugVec::Ones();
  prob.q_diag.segment<3>(kEePosIdx).setConstant(20.0);
  prob.r_diag = Vec3::Ones();
  prob.u_min = Control::Constant(-3.0);
  prob.u_max = Control::Constant(3.0);
  prob.z_rest = result.refs.z_bar.front();

  auto [traj, stats] = trajopt::solve(prob);
  result.stats = stats;
  result.model_traj = traj;
  result.solver_failed = stats.status == trajopt::SolveStatus::kDiverged;

  FlightLog baseline;
  if (!result.solver_failed) {
    result.model_vs_ref = mean_euclidean_distance(ee_positions(traj.states),
                                                  detail::ref_ee_track(result.refs));
    result.replay = plant::run_plant(detail::replay_commands(traj.controls), cfg,
                                     params, seed, dt);
    result.plant_vs_ref = mean_euclidean_distance(detail::log_ee_track(result.replay),
                                                  detail::ref_ee_track(result.refs));
    result.plant_vs_model = mean_euclidean_distance(
        detail::log_ee_track(result.replay), ee_positions(traj.states));

    std::vector<Control> naive;
    naive.reserve(n);
    for (const auto& z : result.refs.z_bar) {
      naive.emplace_back(z(kEePosIdx), z(kEePosIdx + 1),
                         z(kEePosIdx + 2) + cfg.length_m);
    }
    baseline = plant::run_plant(naive, cfg, params, seed, dt);
    result.baseline_vs_ref = mean_euclidean_distance(detail::log_ee_track(baseline),
                                                     detail::ref_ee_track(result.refs));
  }

  result.metrics["task"] = result.task;
  if (!label.empty()) result.metrics["config_label"] = label;
  result.metrics["config"] = io::config_to_json(cfg);
  result.metrics["period_s"] = period;
  result.metrics["seed"] = seed;
  result.metrics["mean_ee_error_m"] = detail::finite_or_null(result.plant_vs_ref);
  result.metrics["model_mean_ee_error_m"] = detail::finite_or_null(result.model_vs_ref);
  result.metrics["plant_vs_model_mean_m"] = detail::finite_or_null(result.plant_vs_model);
  result.metrics["baseline_mean_ee_error_m"] =
      detail::finite_or_null(result.baseline_vs_ref);
  result.metrics["solver"] = detail::solver_json(stats);
  result.metrics["solver_failed"] = result.solver_failed;

  if (!out_dir.empty()) {
    detail::write_artifacts(out_dir, result, seed, params, {},
                            result.solver_failed ? nullptr : &baseline);
  }
  return result;
}

/// Swing the arm out to a reach target at the trajectory midpoint under a
/// tight command box; reach conditions are midpoint equality constraints on
/// the end effector position (with -0.1 m lead-in offsets one step before).
/// Passing NaN for z_target (the default) places the target 0.3 m above the
/// resting tip height, so the maneuver is equally demanding at every arm
/// length. The open-loop replay degrades with the number of pendulum periods
/// before the reach, so the default horizon keeps the build-up short.
inline RunResult run_swing(const CornerSet& corners, const VineConfig& cfg,
                           double x_target = 1.0,
                           double z_target = std::numeric_limits<double>::quiet_NaN(),
                           int n_states = 150, uint64_t seed = 1,
                           const plant::PlantParams& params = {},
                           const std::string& out_dir = {},
                           const std::string& label = {},
                           double x_amp = 1.2) {
  check_corner_set(corners);
  if (std::isnan(z_target)) {
    z_target = reference::kHoverZ - cfg.length_m + 0.3;
  }
  const DynModel model = interpolate(corners, cfg);
  const double dt = model.dt;

  RunResult result;
  result.task = "swing";
  result.label = label;
  result.cfg = cfg;
  result.refs = reference::swing_reference(n_states, x_amp, cfg.length_m, 0.5, dt);
  result.refs.target = Vec3(x_target, 0.0, z_target);
  result.refs.has_target = true;

  trajopt::TrajOptProblem prob;
  prob.models = {model};
  prob.refs = result.refs;
  prob.horizon = n_states;
  prob.q_diag = AugVec::Ones();
  prob.r_diag = Vec3::Constant(10.0);
  prob.u_min = Control(-2.0, -0.1, reference::kHoverZ - 0.1);
  prob.u_max = Control(2.0, 0.1, reference::kHoverZ + 0.1);
  prob.state_bounds.push_back({kQuadPosIdx + 0, -trajopt::kInf, x_target - 0.4});
  prob.state_bounds.push_back(
      {kQuadPosIdx + 2, reference::kHoverZ - 0.25, reference::kHoverZ + 0.25});
  // Midpoint reach conditions on the end effector (x and height), with the
  // lead-in one step earlier shifted back 0.1 m so the arm arrives moving
  // forwards and upwards.
  const int mid = n_states / 2 - 1;
  prob.equalities.push_back({mid, kEePosIdx + 0, x_target});
  prob.equalities.push_back({mid, kEeHeightIdx, z_target});
  prob.equalities.push_back({mid - 1, kEePosIdx + 0, x_target - 0.1});
  prob.equalities.push_back({mid - 1, kEeHeightIdx, z_target - 0.1});
  prob.z_rest = result.refs.z_bar.front();

  auto [traj, stats] = trajopt::solve(prob);
  result.stats = stats;
  result.solver_failed = stats.status == trajopt::SolveStatus::kDiverged;
  // The solver only drives box violations below its 1e-3 tolerance; the tight
  // command limits are hard actuator-style limits here, so project the
  // commands onto the box and re-roll the model. The projection moves each
  // command by at most the residual violation, which is orders of magnitude
  // below the reach tolerances.
  if (!result.solver_failed && !traj.controls.empty()) {
    for (auto& u : traj.controls) u = u.cwiseMax(prob.u_min).cwiseMin(prob.u_max);
    traj = rollout(model, prob.z_rest, traj.controls);
  }
  result.model_traj = traj;

  double eq_residual = std::numeric_limits<double>::quiet_NaN();
  double control_box_excess = std::numeric_limits<double>::quiet_NaN();
  if (!result.solver_failed) {
    result.model_vs_ref = mean_euclidean_distance(ee_positions(traj.states),
                                                  detail::ref_ee_track(result.refs));
    eq_residual = 0.0;
    for (const auto& e : prob.equalities) {
      eq_residual = std::max(eq_residual,
                             std::abs(traj.states[e.step](e.index) - e.value));
    }
    control_box_excess = 0.0;
    for (const auto& u : traj.controls) {
      for (int i = 0; i < kControlDim; ++i) {
        control_box_excess = std::max(control_box_excess, u(i) - prob.u_max(i));
        control_box_excess = std::max(control_box_excess, prob.u_min(i) - u(i));
      }
    }

    result.replay = plant::run_plant(detail::replay_commands(traj.controls), cfg,
                                     params, seed, dt);
    result.plant_vs_ref = mean_euclidean_distance(detail::log_ee_track(result.replay),
                                                  detail::ref_ee_track(result.refs));
    result.plant_vs_model = mean_euclidean_distance(
        detail::log_ee_track(result.replay), ee_positions(traj.states));
    result.miss_distance =
        (ee_pos(result.replay.states[mid]) - result.refs.target).norm();

    double excursion = 0.0;
    for (const auto& x : result.replay.states) {
      excursion = std::max(excursion, x(kQuadPosIdx) - (x_target - 0.4));
      excursion = std::max(excursion,
                           std::abs(x(kQuadPosIdx + 2) - reference::kHoverZ) - 0.25);
    }
    result.max_bound_excursion = std::max(0.0, excursion);
  }

  result.metrics["task"] = result.task;
  if (!label.empty()) result.metrics["config_label"] = label;
  result.metrics["config"] = io::config_to_json(cfg);
  result.metrics["x_target_m"] = x_target;
  result.metrics["z_target_m"] = z_target;
  result.metrics["seed"] = seed;
  result.metrics["mean_ee_error_m"] = detail::finite_or_null(result.plant_vs_ref);
  result.metrics["model_mean_ee_error_m"] = detail::finite_or_null(result.model_vs_ref);
  result.metrics["plant_vs_model_mean_m"] = detail::finite_or_null(result.plant_vs_model);
  result.metrics["miss_distance_m"] = detail::finite_or_null(result.miss_distance);
  result.metrics["max_bound_excursion_m"] =
      detail::finite_or_null(result.max_bound_excursion);
  result.metrics["model_equality_residual_m"] = detail::finite_or_null(eq_residual);
  result.metrics["model_control_box_excess_m"] =
      detail::finite_or_null(control_box_excess);
  result.metrics["solver"] = detail::solver_json(stats);
  result.metrics["solver_failed"] = result.solver_failed;

  if (!out_dir.empty()) {
    detail::write_artifacts(out_dir, result, seed, params, {}, nullptr);
  }
  return result;
}

/// Track the figure eight while the arm grows from the empty/short corner to
/// the inflated/long corner over 20 s; the model (and the plant) change
/// configuration every step.
inline RunResult run_growth(const CornerSet& corners, uint64_t seed = 1,
                            const plant::PlantParams& params = {},
                            const std::string& out_dir = {}) {
  check_corner_set(corners);
  const double dt = corners.es.dt;
  const int n = 401;  // 400 steps = 20 s
  const double period = 10.0, ramp = 2.0;
  const std::vector<VineConfig> schedule = reference::growth_schedule(n, dt);

  RunResult result;
  result.task = "growth";
  result.cfg = schedule.front();
  result.refs = reference::growth_reference(schedule, period, ramp,
                                            reference::default_shape_params(period), dt);

  trajopt::TrajOptProblem prob;
  prob.models.reserve(n - 1);
  for (int k = 0; k + 1 < n; ++k) prob.models.push_back(interpolate(corners, schedule[k]));
  prob.refs = result.refs;
  prob.horizon = n;
  prob.q_diag = AugVec::Ones();
  prob.q_diag.segment<3>(kEePosIdx).setConstant(20.0);
  prob.r_diag = Vec3::Ones();
  prob.u_min = Control::Constant(-3.0);
  prob.u_max = Control::Constant(3.0);
  prob.z_rest = result.refs.z_bar.front();

  auto [traj, stats] = trajopt::solve(prob);
  result.stats = stats;
  result.model_traj = traj;
  result.solver_failed = stats.status == trajopt::SolveStatus::kDiverged;

  if (!result.solver_failed) {
    result.model_vs_ref = mean_euclidean_distance(ee_positions(traj.states),
                                                  detail::ref_ee_track(result.refs));
    const double ref_height = result.refs.z_bar.front()(kEeHeightIdx);
    double dev = 0.0;
    for (const auto& z : traj.states) {
      dev = std::max(dev, std::abs(z(kEeHeightIdx) - ref_height));
    }
    result.max_height_dev = dev;
    result.qr_ref_rise = result.refs.z_bar.back()(kQuadPosIdx + 2) -
                         result.refs.z_bar.front()(kQuadPosIdx + 2);

    result.replay = plant::run_plant(detail::replay_commands(traj.controls), schedule,
                                     params, seed, dt);
    result.plant_vs_ref = mean_euclidean_distance(detail::log_ee_track(result.replay),
                                                  detail::ref_ee_track(result.refs));
    result.plant_vs_model = mean_euclidean_distance(
        detail::log_ee_track(result.replay), ee_positions(traj.states));
  }

  result.metrics["task"] = result.task;
  result.metrics["config"] = io::config_to_json(result.cfg);
  result.metrics["seed"] = seed;
  result.metrics["mean_ee_error_m"] = detail::finite_or_null(result.plant_vs_ref);
  result.metrics["model_mean_ee_error_m"] = detail::finite_or_null(result.model_vs_ref);
  result.metrics["plant_vs_model_mean_m"] = detail::finite_or_null(result.plant_vs_model);
  result.metrics["max_model_ee_height_dev_m"] =
      detail::finite_or_null(result.max_height_dev);
  result.metrics["qr_ref_rise_m"] = detail::finite_or_null(result.qr_ref_rise);
  result.metrics["solver"] = detail::solver_json(stats);
  result.metrics["solver_failed"] = result.solver_failed;

  if (!out_dir.empty()) {
    detail::write_artifacts(out_dir, result, seed, params, schedule, nullptr);
  }
  return result;
}

/// Rebuild metrics and plots for an existing run directory from its CSVs.
inline nlohmann::json report_run(const std::string& run_dir) {
  namespace fs = std::filesystem;
  const fs::path dir(run_dir);
  const FlightLog ref_log = io::read_flight_log(dir / "reference.csv");
  const FlightLog replay = io::read_flight_log(dir / "replay.csv");

  auto track = [](const FlightLog& log) {
    std::vector<Vec3> out;
    for (const auto& x : log.states) out.push_back(ee_pos(x));
    return out;
  };
  nlohmann::json metrics;
  metrics["mean_ee_error_m"] =
      mean_euclidean_distance(track(replay), track(ref_log));
  if (fs::exists(dir / "model_traj.csv")) {
    const FlightLog model_log = io::read_flight_log(dir / "model_traj.csv");
    metrics["model_mean_ee_error_m"] =
        mean_euclidean_distance(track(model_log), track(ref_log));
    metrics["plant_vs_model_mean_m"] =
        mean_euclidean_distance(track(replay), track(model_log));
  }
  if (fs::exists(dir / "baseline.csv")) {
    const FlightLog base = io::read_flight_log(dir / "baseline.csv");
    metrics["baseline_mean_ee_error_m"] =
        mean_euclidean_distance(track(base), track(ref_log));
  }
  io::atomic_write(dir / "metrics.json", metrics.dump(2) + "\n");

  auto col = [](const std::vector<Vec3>& v, int i) {
    std::vector<double> out(v.size());
    for (size_t k = 0; k < v.size(); ++k) out[k] = v[k](i);
    return out;
  };
  const auto ref_ee = track(ref_log);
  const auto plant_ee = track(replay);
  std::vector<svg::Series> xy;
  xy.push_back({col(ref_ee, 0), col(ref_ee, 1), "#999999", "", "reference", 1.5});
  xy.push_back({col(plant_ee, 0), col(plant_ee, 1), "#d62728", "", "plant", 1.5});
  svg::write_line_plot(dir / "trace_xy.svg", "end effector path", "x [m]", "y [m]", xy);

  std::vector<double> t(replay.states.size());
  for (size_t k = 0; k < t.size(); ++k) t[k] = k * replay.dt;
  std::vector<double> cmd(t.size()), qr(t.size()), ee(t.size());
  for (size_t k = 0; k < t.size(); ++k) {
    cmd[k] = replay.controls[k].x();
    qr[k] = replay.states[k](kQuadPosIdx);
    ee[k] = replay.states[k](kEePosIdx);
  }
  std::vector<svg::Series> ts;
  ts.push_back({t, cmd, "#555555", "2 3", "command x", 1.3});
  ts.push_back({t, qr, "#1f77b4", "7 4", "quadrotor x", 1.5});
  ts.push_back({t, ee, "#d62728", "", "end effector x", 1.7});
  svg::write_line_plot(dir / "timeseries_x.svg", "x channels", "t [s]", "x [m]", ts);
  return metrics;
}

}  // namespace vinetraj::experiments
