#pragma once

#include "vinetraj/core.hpp"

#include <random>

namespace vinetraj::plant {

struct PlantParams {
  double omega_n = 4.0;      // natural frequency of the position loop [rad/s]
  double zeta = 0.95;        // position loop damping ratio
  double k0 = 0.0;           // arm stiffness offset [1/s^2]
  double k1 = 25.0;          // arm stiffness per unit pressure [1/(s^2 kPa)]
  double c_damp = 0.8;       // arm angular damping [1/s]
  double g = 9.81;           // gravity [m/s^2]
  double noise_sigma = 0.002;  // measurement noise std per position axis [m]
};

/// Internal truth state: quadrotor position/velocity plus the arm treated as
/// a damped spherical pendulum hanging from the quadrotor. pend_dir is the
/// unit vector from the quadrotor to the end effector.
struct PlantState {
  Vec3 p_qr = Vec3::Zero();
  Vec3 v_qr = Vec3::Zero();
  Vec3 pend_dir = Vec3(0.0, 0.0, -1.0);
  Vec3 pend_omega = Vec3::Zero();
};

inline PlantState equilibrium(const Vec3& p_qr) {
  PlantState s;
  s.p_qr = p_qr;
  return s;
}

namespace detail {

using Y = Eigen::Matrix<double, 12, 1>;

inline Y pack(const PlantState& s) {
  Y y;
  y << s.p_qr, s.v_qr, s.pend_dir, s.pend_omega;
  return y;
}

inline PlantState unpack(const Y& y) {
  PlantState s;
  s.p_qr = y.segment<3>(0);
  s.v_qr = y.segment<3>(3);
  s.pend_dir = y.segment<3>(6);
  s.pend_omega = y.segment<3>(9);
  return s;
}

// Quadrotor position loop is a critically-ish damped second order system
// toward the command. The arm is a spherical pendulum whose effective
// restoring stiffness grows with pressure and whose pivot acceleration is the
// quadrotor acceleration (entering with opposite sign: accelerating the pivot
// forward kicks the bob backward).
inline Y derivative(const Y& y, const Control& u, double k_eff, double inv_len,
                    const PlantParams& pp) {
  const Vec3 p = y.segment<3>(0);
  const Vec3 v = y.segment<3>(3);
  const Vec3 r = y.segment<3>(6);
  const Vec3 w = y.segment<3>(9);
  const Vec3 a_qr = pp.omega_n * pp.omega_n * (u - p) - 2.0 * pp.zeta * pp.omega_n * v;
  const Vec3 down(0.0, 0.0, -1.0);
  Y dy;
  dy.segment<3>(0) = v;
  dy.segment<3>(3) = a_qr;
  dy.segment<3>(6) = w.cross(r);
  dy.segment<3>(9) = k_eff * r.cross(down) - inv_len * r.cross(a_qr) - pp.c_damp * w;
  return dy;
}

}  // namespace detail

/// Advance the truth state by one command interval (RK4, 5 substeps).
inline PlantState plant_step(const PlantState& s, const Control& u,
                             const VineConfig& cfg, const PlantParams& pp,
                             double dt = kDt) {
  if (!(dt > 0.0)) throw std::invalid_argument("plant_step: dt must be positive");
  if (!in_config_domain(cfg)) {
    throw std::invalid_argument("plant_step: configuration outside the valid rectangle");
  }
  const double k_eff = pp.g / cfg.length_m + pp.k0 + pp.k1 * cfg.pressure_kpa;
  const double inv_len = 1.0 / cfg.length_m;
  constexpr int kSubsteps = 5;
  const double h = dt / kSubsteps;
  detail::Y y = detail::pack(s);
  for (int i = 0; i < kSubsteps; ++i) {
    const detail::Y k1 = detail::derivative(y, u, k_eff, inv_len, pp);
    const detail::Y k2 = detail::derivative(y + 0.5 * h * k1, u, k_eff, inv_len, pp);
    const detail::Y k3 = detail::derivative(y + 0.5 * h * k2, u, k_eff, inv_len, pp);
    const detail::Y k4 = detail::derivative(y + h * k3, u, k_eff, inv_len, pp);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    // Keep the direction on the unit sphere and the angular rate tangential.
    Vec3 r = y.segment<3>(6);
    r.normalize();
    y.segment<3>(6) = r;
    Vec3 w = y.segment<3>(9);
    y.segment<3>(9) = w - w.dot(r) * r;
  }
  return detail::unpack(y);
}

/// Motion-capture style measurement. The quaternion vector part is the
/// small-angle tilt a position-tracking quadrotor holds while it accelerates
/// toward the active command; positions get additive Gaussian noise.
inline State observe(const PlantState& s, const Control& u_prev,
                     const VineConfig& cfg, const PlantParams& pp,
                     std::mt19937_64& rng) {
  const Vec3 a = pp.omega_n * pp.omega_n * (u_prev - s.p_qr);
  Vec3 qv(-a.y() / (2.0 * pp.g), a.x() / (2.0 * pp.g), 0.0);
  const double qn = qv.norm();
  if (qn > 1.0) qv /= qn;  // keep a representable quaternion vector part
  Vec3 p_qr = s.p_qr;
  Vec3 p_ee = s.p_qr + cfg.length_m * s.pend_dir;
  if (pp.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, pp.noise_sigma);
    for (int i = 0; i < 3; ++i) p_qr(i) += noise(rng);
    for (int i = 0; i < 3; ++i) p_ee(i) += noise(rng);
  }
  return make_state(p_qr, qv, p_ee);
}

inline State observe(const PlantState& s, const Control& u_prev,
                     const VineConfig& cfg, const PlantParams& pp, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return observe(s, u_prev, cfg, pp, rng);
}

/// Execute a command sequence open loop from rest under the first command.
/// Row k of the returned log pairs the measured state at step k with the
/// command active over the following interval; the configuration may vary
/// per step (growth) via the schedule.
inline FlightLog run_plant(const std::vector<Control>& u_traj,
                           const std::vector<VineConfig>& cfg_schedule,
                           const PlantParams& pp, uint64_t seed, double dt = kDt) {
  if (u_traj.empty()) throw std::invalid_argument("run_plant: empty command trajectory");
  if (cfg_schedule.size() != u_traj.size()) {
    throw std::invalid_argument("run_plant: configuration schedule must match command count");
  }
  for (const auto& cfg : cfg_schedule) {
    if (!in_config_domain(cfg)) {
      throw std::invalid_argument("run_plant: configuration outside the valid rectangle");
    }
  }
  std::mt19937_64 rng(seed);
  FlightLog log;
  log.dt = dt;
  log.cfg = cfg_schedule.front();
  log.controls = u_traj;
  log.states.reserve(u_traj.size());
  PlantState s = equilibrium(u_traj.front());
  log.states.push_back(observe(s, u_traj[0], cfg_schedule[0], pp, rng));
  for (size_t k = 0; k + 1 < u_traj.size(); ++k) {
    s = plant_step(s, u_traj[k], cfg_schedule[k], pp, dt);
    log.states.push_back(observe(s, u_traj[k], cfg_schedule[k + 1], pp, rng));
  }
  return log;
}

inline FlightLog run_plant(const std::vector<Control>& u_traj, const VineConfig& cfg,
                           const PlantParams& pp, uint64_t seed, double dt = kDt) {
  return run_plant(u_traj, std::vector<VineConfig>(u_traj.size(), cfg), pp, seed, dt);
}

}  // namespace vinetraj::plant
