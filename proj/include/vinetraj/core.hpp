#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vinetraj {

using Vec3 = Eigen::Vector3d;
using State = Eigen::Matrix<double, 9, 1>;
using AugState = Eigen::Matrix<double, 27, 1>;
using AugVec = Eigen::Matrix<double, 27, 1>;
using Control = Eigen::Vector3d;

inline constexpr int kStateDim = 9;
inline constexpr int kControlDim = 3;
inline constexpr int kHistory = 3;
inline constexpr int kAugDim = kStateDim * kHistory;

// Command rate of the position interface; one model step per command.
inline constexpr double kDt = 0.05;

// Flat state layout: [0:3) quadrotor position, [3:6) quaternion vector part,
// [6:9) end effector position, all in the world frame. Index 8 is the end
// effector height channel, the one modeled with the quadratic regressor.
inline constexpr int kQuadPosIdx = 0;
inline constexpr int kQuatVecIdx = 3;
inline constexpr int kEePosIdx = 6;
inline constexpr int kEeHeightIdx = 8;

inline Vec3 quad_pos(const State& x) { return x.segment<3>(kQuadPosIdx); }
inline Vec3 quat_vec(const State& x) { return x.segment<3>(kQuatVecIdx); }
inline Vec3 ee_pos(const State& x) { return x.segment<3>(kEePosIdx); }

inline State make_state(const Vec3& quad, const Vec3& qvec, const Vec3& ee) {
  State x;
  x << quad, qvec, ee;
  return x;
}

inline State newest(const AugState& z) { return z.head<kStateDim>(); }

/// Arm configuration: gauge pressure [kPa] and vine length [m]. The valid
/// domain is the rectangle spanned by the four fitted corner models.
struct VineConfig {
  double pressure_kpa = 0.0;
  double length_m = 0.7;
};

inline constexpr double kPressureMin = 0.0;
inline constexpr double kPressureMax = 0.4;
inline constexpr double kLengthMin = 0.7;
inline constexpr double kLengthMax = 1.0;

inline bool in_config_domain(const VineConfig& c, double tol = 1e-9) {
  return c.pressure_kpa >= kPressureMin - tol &&
         c.pressure_kpa <= kPressureMax + tol &&
         c.length_m >= kLengthMin - tol && c.length_m <= kLengthMax + tol;
}

/// Stack the current and two previous states, newest first.
inline AugState augment(const State& x_k, const State& x_km1, const State& x_km2) {
  if (!x_k.allFinite() || !x_km1.allFinite() || !x_km2.allFinite()) {
    throw std::invalid_argument("augment: non-finite state component");
  }
  AugState z;
  z << x_k, x_km1, x_km2;
  return z;
}

/// Advance the history stack one step: the new state enters at the top and
/// the oldest one falls off the bottom.
inline AugState shift(const AugState& z, const State& x_new) {
  if (!z.allFinite() || !x_new.allFinite()) {
    throw std::invalid_argument("shift: non-finite input");
  }
  AugState out;
  out << x_new, z.head<2 * kStateDim>();
  return out;
}

/// Mean 3D Euclidean distance between two equally long position sequences.
inline double mean_euclidean_distance(const std::vector<Vec3>& a,
                                      const std::vector<Vec3>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw std::invalid_argument(
        "mean_euclidean_distance: sequences must have equal nonzero length");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]).norm();
  return acc / static_cast<double>(a.size());
}

/// Augmented-state trajectory; controls has one entry fewer than states.
struct Trajectory {
  double dt = kDt;
  std::vector<AugState> states;
  std::vector<Control> controls;
};

inline std::vector<Vec3> ee_positions(const std::vector<AugState>& states) {
  std::vector<Vec3> out;
  out.reserve(states.size());
  for (const auto& z : states) out.emplace_back(z.segment<3>(kEePosIdx));
  return out;
}

/// One recorded flight: per-step measured state and the command that was
/// active over the following interval. states and controls have equal length;
/// the final state row is the measurement taken after the second-to-last
/// command finished (the last command is logged but its outcome is not).
struct FlightLog {
  double dt = kDt;
  VineConfig cfg;
  std::vector<State> states;
  std::vector<Control> controls;
};

}  // namespace vinetraj
