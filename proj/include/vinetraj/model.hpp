#pragma once

#include "vinetraj/core.hpp"
#include "vinetraj/features.hpp"

#include <algorithm>
#include <cmath>

namespace vinetraj {

/// Fitted one-step dynamics for a fixed arm configuration. Channels 0..7 are
/// a linear map of the stacked history and the command; the end effector
/// height channel is a full quadratic polynomial in the same inputs (the only
/// channel with an intercept).
struct DynModel {
  Eigen::Matrix<double, kStateDim, kAugDim> A =
      Eigen::Matrix<double, kStateDim, kAugDim>::Zero();
  Eigen::Matrix<double, kStateDim, kControlDim> B =
      Eigen::Matrix<double, kStateDim, kControlDim>::Zero();
  Eigen::VectorXd a =
      Eigen::VectorXd::Zero(sysid::num_quadratic_features(kAugDim + kControlDim));
  VineConfig cfg;
  double dt = kDt;
  int feature_version = sysid::kFeatureVersion;
};

namespace detail {
using WVec = Eigen::Matrix<double, kAugDim + kControlDim, 1>;
inline WVec pack_input(const AugState& z, const Control& u) {
  WVec w;
  w << z, u;
  return w;
}
}  // namespace detail

inline void check_feature_version(const DynModel& m) {
  if (m.feature_version != sysid::kFeatureVersion) {
    throw std::runtime_error("model: unrecognized feature ordering version");
  }
}

inline State predict(const DynModel& m, const AugState& z, const Control& u) {
  check_feature_version(m);
  State x = m.A * z + m.B * u;
  x(kEeHeightIdx) = sysid::quadratic_eval(m.a, detail::pack_input(z, u));
  return x;
}

struct StepJacobians {
  Eigen::Matrix<double, kStateDim, kAugDim> dz;
  Eigen::Matrix<double, kStateDim, kControlDim> du;
};

inline StepJacobians jacobians(const DynModel& m, const AugState& z, const Control& u) {
  check_feature_version(m);
  StepJacobians j{m.A, m.B};
  detail::WVec w = detail::pack_input(z, u);
  detail::WVec g;
  sysid::quadratic_grad(m.a, w, g);
  j.dz.row(kEeHeightIdx) = g.head<kAugDim>().transpose();
  j.du.row(kEeHeightIdx) = g.tail<kControlDim>().transpose();
  return j;
}

namespace detail {
template <class ModelAt>
Trajectory rollout_impl(ModelAt&& model_at, const AugState& z0,
                        const std::vector<Control>& controls, double dt) {
  if (!z0.allFinite()) throw std::invalid_argument("rollout: non-finite initial state");
  Trajectory traj;
  traj.dt = dt;
  traj.controls = controls;
  traj.states.reserve(controls.size() + 1);
  traj.states.push_back(z0);
  AugState z = z0;
  for (size_t k = 0; k < controls.size(); ++k) {
    const State x = predict(model_at(k), z, controls[k]);
    if (!x.allFinite()) {
      throw std::runtime_error("rollout: prediction diverged to non-finite values");
    }
    z = shift(z, x);
    traj.states.push_back(z);
  }
  return traj;
}
}  // namespace detail

inline Trajectory rollout(const DynModel& m, const AugState& z0,
                          const std::vector<Control>& controls, double dt = kDt) {
  return detail::rollout_impl([&](size_t) -> const DynModel& { return m; }, z0,
                              controls, dt);
}

/// Time-varying rollout; schedule holds one model per control step.
inline Trajectory rollout(const std::vector<DynModel>& schedule, const AugState& z0,
                          const std::vector<Control>& controls, double dt = kDt) {
  if (schedule.size() != controls.size()) {
    throw std::invalid_argument("rollout: model schedule must match control count");
  }
  return detail::rollout_impl(
      [&](size_t k) -> const DynModel& { return schedule[k]; }, z0, controls, dt);
}

/// The four fitted corners of the (pressure, length) rectangle:
/// es = empty/short, is = inflated/short, el = empty/long, il = inflated/long.
struct CornerSet {
  DynModel es, is, el, il;
};

struct CornerWeights {
  double es, is, el, il;
};

inline CornerWeights interp_weights(const VineConfig& cfg) {
  if (!in_config_domain(cfg)) {
    throw std::domain_error(
        "interp_weights: configuration outside the pressure/length rectangle");
  }
  const double s = std::clamp(
      (cfg.pressure_kpa - kPressureMin) / (kPressureMax - kPressureMin), 0.0, 1.0);
  const double t = std::clamp(
      (cfg.length_m - kLengthMin) / (kLengthMax - kLengthMin), 0.0, 1.0);
  return {(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t};
}

inline void check_corner_set(const CornerSet& cs) {
  auto at = [](const DynModel& m, double p, double l) {
    return m.cfg.pressure_kpa == p && m.cfg.length_m == l;
  };
  if (!at(cs.es, kPressureMin, kLengthMin) || !at(cs.is, kPressureMax, kLengthMin) ||
      !at(cs.el, kPressureMin, kLengthMax) || !at(cs.il, kPressureMax, kLengthMax)) {
    throw std::invalid_argument("corner set: models must sit exactly at the rectangle corners");
  }
  if (cs.es.dt != cs.is.dt || cs.es.dt != cs.el.dt || cs.es.dt != cs.il.dt) {
    throw std::invalid_argument("corner set: corners disagree on dt");
  }
  check_feature_version(cs.es);
  check_feature_version(cs.is);
  check_feature_version(cs.el);
  check_feature_version(cs.il);
}

/// Bilinear blend of the corner parameters. Because every model output is
/// linear in its parameters, blending parameters and blending predictions are
/// the same operation.
inline DynModel interpolate(const CornerSet& cs, const VineConfig& cfg) {
  check_corner_set(cs);
  const CornerWeights w = interp_weights(cfg);
  DynModel m;
  m.A = w.es * cs.es.A + w.is * cs.is.A + w.el * cs.el.A + w.il * cs.il.A;
  m.B = w.es * cs.es.B + w.is * cs.is.B + w.el * cs.el.B + w.il * cs.il.B;
  m.a = w.es * cs.es.a + w.is * cs.is.a + w.el * cs.el.a + w.il * cs.il.a;
  m.cfg = cfg;
  m.dt = cs.es.dt;
  m.feature_version = cs.es.feature_version;
  return m;
}

}  // namespace vinetraj
