#pragma once

#include "vinetraj/core.hpp"

#include <cmath>
#include <numbers>

namespace vinetraj::reference {

// Nominal quadrotor hover height; the end effector reference height follows
// from it by subtracting the vine length.
inline constexpr double kHoverZ = 1.5;

/// Tracking references for the optimizer: one augmented target per step plus
/// nominal controls, and enough metadata to reproduce the task.
struct ReferenceSet {
  double dt = kDt;
  std::vector<AugState> z_bar;
  std::vector<Control> u_bar;
  double period_s = 0.0;                  // lap period when periodic
  std::vector<double> length_schedule;    // per-step vine length when it varies
  Vec3 target = Vec3::Zero();             // reach target when applicable
  bool has_target = false;
};

/// Figure-eight point at path time tau for lap period T and vine length l.
inline Vec3 lemniscate_point(double tau, double period, double length) {
  const double th = 2.0 * std::numbers::pi * tau / period;
  return {std::sin(th), std::cos(th) * std::sin(th), kHoverZ - length};
}

/// Quadratic ramp-in of path time: constant-acceleration start that merges
/// into unit rate at t = ramp, reaching tau = t - ramp/2 afterwards.
inline double ramped_path_time(double t, double ramp) {
  if (ramp <= 0.0) return t;
  if (t <= 0.0) return 0.0;
  if (t <= ramp) return t * t / (2.0 * ramp);
  return t - ramp / 2.0;
}

struct ShapeParams {
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  int alpha_t = 0;  // lookahead in steps
};

/// Hand-tuned feedforward shaping gains; the y attenuation depends on how
/// aggressive the lap period is.
inline ShapeParams default_shape_params(double period) {
  ShapeParams p;
  p.alpha_t = 10;
  p.alpha_x = 0.9;
  p.alpha_y = period >= 8.0 ? 1.0 : 0.6;
  return p;
}

/// Nominal commands from a quadrotor position reference: xy channels are
/// scaled and time-advanced copies of the reference, z is passed through
/// unshifted. Lookahead indices clamp at the final reference sample.
inline std::vector<Control> shape_control(const std::vector<Vec3>& qr_ref,
                                          const ShapeParams& p) {
  if (qr_ref.size() < 2) {
    throw std::invalid_argument("shape_control: need at least two reference points");
  }
  const int n = static_cast<int>(qr_ref.size());
  std::vector<Control> u;
  u.reserve(n - 1);
  for (int k = 0; k + 1 < n; ++k) {
    const int j = std::min(k + p.alpha_t, n - 1);
    u.emplace_back(p.alpha_x * qr_ref[j].x(), p.alpha_y * qr_ref[j].y(),
                   qr_ref[k].z());
  }
  return u;
}

namespace detail {

inline AugState rest_augmented(const Vec3& qr, const Vec3& ee) {
  const State x = make_state(qr, Vec3::Zero(), ee);
  return augment(x, x, x);
}

inline ReferenceSet from_tracks(const std::vector<Vec3>& qr,
                                const std::vector<Vec3>& ee,
                                const ShapeParams& shape, double dt) {
  ReferenceSet refs;
  refs.dt = dt;
  refs.z_bar.reserve(qr.size());
  for (size_t k = 0; k < qr.size(); ++k) {
    refs.z_bar.push_back(rest_augmented(qr[k], ee[k]));
  }
  refs.u_bar = shape_control(qr, shape);
  return refs;
}

}  // namespace detail

/// Figure-eight tracking task: the end effector follows the lemniscate at a
/// fixed height, the quadrotor reference rides directly above it.
inline ReferenceSet lemniscate_reference(double period, double length, int n_states,
                                         double ramp, const ShapeParams& shape,
                                         double dt = kDt) {
  if (n_states < 2) throw std::invalid_argument("lemniscate_reference: horizon too short");
  if (period <= 0.0) throw std::invalid_argument("lemniscate_reference: period must be positive");
  std::vector<Vec3> qr(n_states), ee(n_states);
  for (int k = 0; k < n_states; ++k) {
    const double tau = ramped_path_time(k * dt, ramp);
    ee[k] = lemniscate_point(tau, period, length);
    qr[k] = ee[k] + Vec3(0.0, 0.0, length);
  }
  ReferenceSet refs = detail::from_tracks(qr, ee, shape, dt);
  refs.period_s = period;
  return refs;
}

/// Nominal commands for the swing-to-target task: a symmetric trapezoid in x
/// (ramp up, plateau, ramp down, then the mirror image below zero) that
/// pumps the arm, with y zero and z held at hover. The second half is the
/// odd reflection of the first about the midpoint step.
inline std::vector<Control> swing_commands(int n_states, double x_amp,
                                           double plateau_s = 0.5, double dt = kDt) {
  if (n_states < 8 || n_states % 2 != 0) {
    throw std::invalid_argument("swing_commands: need an even horizon of at least 8 states");
  }
  const int n_controls = n_states - 1;
  const int c = n_states / 2;
  const int p = static_cast<int>(std::lround(plateau_s / dt));
  const int r = (c - p) / 2;
  if (r < 1) throw std::invalid_argument("swing_commands: horizon too short for the plateau");
  const double slope = x_amp / r;
  auto half = [&](int k) {
    if (k < r) return slope * k;
    if (k < r + p) return x_amp;
    return std::max(0.0, x_amp - slope * (k - r - p));
  };
  std::vector<Control> u;
  u.reserve(n_controls);
  for (int k = 0; k < n_controls; ++k) {
    const double x = k <= c ? half(k) : -half(2 * c - k);
    u.emplace_back(x, 0.0, kHoverZ);
  }
  return u;
}

/// Swing task references: the state reference tracks the commanded quadrotor
/// position with the arm hanging straight down; reach conditions are imposed
/// as constraints, not through the reference.
inline ReferenceSet swing_reference(int n_states, double x_amp, double length,
                                    double plateau_s = 0.5, double dt = kDt) {
  std::vector<Control> u = swing_commands(n_states, x_amp, plateau_s, dt);
  std::vector<Vec3> qr(n_states), ee(n_states);
  for (int k = 0; k < n_states; ++k) {
    const Control& cmd = u[std::min<size_t>(k, u.size() - 1)];
    qr[k] = Vec3(cmd.x(), cmd.y(), cmd.z());
    ee[k] = qr[k] - Vec3(0.0, 0.0, length);
  }
  ReferenceSet refs;
  refs.dt = dt;
  refs.z_bar.reserve(n_states);
  for (int k = 0; k < n_states; ++k) {
    refs.z_bar.push_back(detail::rest_augmented(qr[k], ee[k]));
  }
  refs.u_bar = std::move(u);
  return refs;
}

/// Linear growth from the empty/short corner to the inflated/long corner.
inline std::vector<VineConfig> growth_schedule(int n_states, double dt = kDt) {
  if (n_states < 2) throw std::invalid_argument("growth_schedule: need at least two steps");
  std::vector<VineConfig> sched(n_states);
  for (int k = 0; k < n_states; ++k) {
    const double f = static_cast<double>(k) / (n_states - 1);
    sched[k].pressure_kpa = kPressureMin + f * (kPressureMax - kPressureMin);
    sched[k].length_m = kLengthMin + f * (kLengthMax - kLengthMin);
  }
  return sched;
}

/// Figure-eight tracking while the arm grows: the end effector keeps the
/// height it has at the initial length, so the quadrotor reference climbs by
/// exactly the total length gained.
inline ReferenceSet growth_reference(const std::vector<VineConfig>& schedule,
                                     double period, double ramp,
                                     const ShapeParams& shape, double dt = kDt) {
  const int n = static_cast<int>(schedule.size());
  if (n < 2) throw std::invalid_argument("growth_reference: schedule too short");
  const double ee_z = kHoverZ - schedule.front().length_m;
  std::vector<Vec3> qr(n), ee(n);
  for (int k = 0; k < n; ++k) {
    const double tau = ramped_path_time(k * dt, ramp);
    const Vec3 pt = lemniscate_point(tau, period, schedule.front().length_m);
    ee[k] = Vec3(pt.x(), pt.y(), ee_z);
    qr[k] = ee[k] + Vec3(0.0, 0.0, schedule[k].length_m);
  }
  ReferenceSet refs = detail::from_tracks(qr, ee, shape, dt);
  refs.period_s = period;
  refs.length_schedule.reserve(n);
  for (const auto& c : schedule) refs.length_schedule.push_back(c.length_m);
  return refs;
}

}  // namespace vinetraj::reference
