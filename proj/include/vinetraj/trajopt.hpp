#pragma once

#include "vinetraj/model.hpp"
#include "vinetraj/reference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace vinetraj::trajopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Box on one augmented-state coordinate, enforced at every step after the
/// fixed initial state.
struct StateBound {
  int index = 0;
  double lower = -kInf;
  double upper = kInf;
};

/// Pin one augmented-state coordinate to a value at one step.
struct EqualityConstraint {
  int step = 0;
  int index = 0;
  double value = 0.0;
};

struct TrajOptProblem {
  // Either one model (time invariant) or one per control step.
  std::vector<DynModel> models;
  reference::ReferenceSet refs;
  AugVec q_diag = AugVec::Ones();
  Vec3 r_diag = Vec3::Ones();
  Control u_min = Control::Constant(-kInf);
  Control u_max = Control::Constant(kInf);
  std::vector<StateBound> state_bounds;
  std::vector<EqualityConstraint> equalities;
  AugState z_rest = AugState::Zero();
  int horizon = 0;  // number of states; controls = horizon - 1
};

struct SolverOptions {
  int max_outer = 20;
  int max_inner = 100;
  double cost_tol = 1e-6;        // relative cost decrease declaring the inner loop done
  double constraint_tol = 1e-3;  // max violation declaring the outer loop done
  double mu_init = 10.0;
  double mu_scale = 10.0;
  double mu_max = 1e8;
  double reg_init = 1e-6;
  double reg_scale = 10.0;
  double reg_max = 1e10;
  double ls_factor = 0.5;
  int ls_steps = 20;
  double armijo = 1e-4;
};

enum class SolveStatus { kConverged, kMaxIterations, kDiverged };

struct SolveStats {
  SolveStatus status = SolveStatus::kMaxIterations;
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double final_cost = 0.0;
  double max_violation = 0.0;
  // Tracking cost after each outer iteration.
  std::vector<double> cost_history;
  // Augmented-Lagrangian objective at each accepted inner iterate, one series
  // per outer iteration; each series is non-increasing.
  std::vector<std::vector<double>> al_history;
};

/// Tracking cost: sum of squared weighted deviations from the references.
/// No 1/2 in front, so the state gradient is 2 Q (z - z_bar).
inline double cost(const std::vector<AugState>& states,
                   const std::vector<Control>& controls,
                   const TrajOptProblem& prob) {
  const size_t n = states.size();
  if (n != prob.refs.z_bar.size() || controls.size() + 1 != n ||
      controls.size() != prob.refs.u_bar.size()) {
    throw std::invalid_argument("cost: trajectory/reference length mismatch");
  }
  double j = 0.0;
  for (size_t k = 0; k < n; ++k) {
    const AugVec d = states[k] - prob.refs.z_bar[k];
    j += d.dot(prob.q_diag.cwiseProduct(d));
  }
  for (size_t k = 0; k + 1 < n; ++k) {
    const Vec3 d = controls[k] - prob.refs.u_bar[k];
    j += d.dot(prob.r_diag.cwiseProduct(d));
  }
  return j;
}

struct StepLinearization {
  Eigen::Matrix<double, kAugDim, kAugDim> fz;
  Eigen::Matrix<double, kAugDim, kControlDim> fu;
};

/// Jacobians of the history-shift step map: the model feeds the top state
/// block, the previous two blocks shift down unchanged.
inline StepLinearization linearize_step(const DynModel& m, const AugState& z,
                                        const Control& u) {
  const StepJacobians j = jacobians(m, z, u);
  StepLinearization lin;
  lin.fz.setZero();
  lin.fz.topRows<kStateDim>() = j.dz;
  lin.fz.block<2 * kStateDim, 2 * kStateDim>(kStateDim, 0).setIdentity();
  lin.fu.setZero();
  lin.fu.topRows<kStateDim>() = j.du;
  return lin;
}

/// Multiplier state for one flattened constraint list.
struct AlState {
  std::vector<double> lambda;
  std::vector<double> mu;
  std::vector<double> prev_violation;
  std::vector<uint8_t> is_equality;
};

/// Standard augmented-Lagrangian dual update: multiplier gradient step
/// (projected for inequalities) and penalty growth for constraints whose
/// violation failed to shrink at least 4x since the previous update.
inline void al_update(AlState& al, const std::vector<double>& c,
                      const SolverOptions& opts = {}) {
  if (c.size() != al.lambda.size()) {
    throw std::invalid_argument("al_update: constraint count mismatch");
  }
  for (size_t i = 0; i < c.size(); ++i) {
    double lam = al.lambda[i] + al.mu[i] * c[i];
    if (!al.is_equality[i]) lam = std::max(0.0, lam);
    al.lambda[i] = lam;
    const double v = al.is_equality[i] ? std::abs(c[i]) : std::max(0.0, c[i]);
    if (v > opts.constraint_tol && v > 0.25 * al.prev_violation[i]) {
      al.mu[i] = std::min(al.mu[i] * opts.mu_scale, opts.mu_max);
    }
    al.prev_violation[i] = v;
  }
}

namespace detail {

// One scalar constraint c <= 0 (or c = 0) on a single coordinate:
// c = sign * (value(coord) - bound).
struct ConstraintRef {
  bool on_state = true;
  bool equality = false;
  int step = 0;
  int coord = 0;
  double bound = 0.0;
  double sign = 1.0;
};

class AlIlqrSolver {
 public:
  AlIlqrSolver(const TrajOptProblem& prob, const SolverOptions& opts)
      : prob_(prob), opts_(opts) {
    validate();
    build_constraints();
  }

  std::pair<Trajectory, SolveStats> run(std::vector<Control> controls);

 private:
  using Fz = Eigen::Matrix<double, kAugDim, kAugDim>;
  using Fu = Eigen::Matrix<double, kAugDim, kControlDim>;
  using Gain = Eigen::Matrix<double, kControlDim, kAugDim>;

  const TrajOptProblem& prob_;
  SolverOptions opts_;
  int n_ = 0;  // states

  std::vector<ConstraintRef> cons_;
  AlState al_;
  std::vector<std::vector<int>> state_cons_at_, control_cons_at_;

  std::vector<Gain> gain_k_;
  std::vector<Control> gain_d_;

  const DynModel& model_at(int k) const {
    return prob_.models.size() == 1 ? prob_.models.front() : prob_.models[k];
  }

  void validate() const;
  void build_constraints();

  double constraint_value(const ConstraintRef& c, const std::vector<AugState>& z,
                          const std::vector<Control>& u) const {
    const double v = c.on_state ? z[c.step](c.coord) : u[c.step](c.coord);
    return c.sign * (v - c.bound);
  }

  std::vector<double> all_constraint_values(const std::vector<AugState>& z,
                                            const std::vector<Control>& u) const {
    std::vector<double> c(cons_.size());
    for (size_t i = 0; i < cons_.size(); ++i) c[i] = constraint_value(cons_[i], z, u);
    return c;
  }

  static double violation(const ConstraintRef& con, double c) {
    return con.equality ? std::abs(c) : std::max(0.0, c);
  }

  double max_violation(const std::vector<double>& c) const {
    double v = 0.0;
    for (size_t i = 0; i < c.size(); ++i) v = std::max(v, violation(cons_[i], c[i]));
    return v;
  }

  std::optional<std::vector<AugState>> rollout_open(const std::vector<Control>& u) const;
  std::optional<std::pair<std::vector<AugState>, std::vector<Control>>> rollout_closed(
      const std::vector<AugState>& z_ref, const std::vector<Control>& u_ref,
      double alpha) const;

  double al_objective(const std::vector<AugState>& z,
                      const std::vector<Control>& u) const;

  // Gradients/diagonal Hessians of the per-step AL stage cost.
  void stage_expansion(int k, const AugState& z, AugVec& gx, AugVec& hx) const;
  void control_expansion(int k, const Control& u, Vec3& gu, Vec3& hu) const;

  bool backward_pass(const std::vector<AugState>& z, const std::vector<Control>& u,
                     double reg, double& d1, double& d2);
};

inline void AlIlqrSolver::validate() const {
  const int n = prob_.horizon;
  if (n < 2) throw std::invalid_argument("trajopt: horizon must be at least 2 states");
  if (static_cast<int>(prob_.refs.z_bar.size()) != n ||
      static_cast<int>(prob_.refs.u_bar.size()) != n - 1) {
    throw std::invalid_argument("trajopt: reference lengths must match the horizon");
  }
  if (prob_.models.size() != 1 && static_cast<int>(prob_.models.size()) != n - 1) {
    throw std::invalid_argument("trajopt: need one model or one per control step");
  }
  for (const auto& m : prob_.models) check_feature_version(m);
  if ((prob_.q_diag.array() < 0.0).any()) {
    throw std::invalid_argument("trajopt: state weights must be nonnegative");
  }
  if ((prob_.r_diag.array() <= 0.0).any()) {
    throw std::invalid_argument("trajopt: control weights must be positive");
  }
  for (int i = 0; i < kControlDim; ++i) {
    if (prob_.u_min(i) > prob_.u_max(i)) {
      throw std::invalid_argument("trajopt: empty control box (min above max)");
    }
  }
  for (const auto& b : prob_.state_bounds) {
    if (b.index < 0 || b.index >= kAugDim || b.lower > b.upper) {
      throw std::invalid_argument("trajopt: malformed state bound");
    }
  }
  for (const auto& e : prob_.equalities) {
    if (e.step < 0 || e.step >= n || e.index < 0 || e.index >= kAugDim) {
      throw std::invalid_argument("trajopt: equality constraint out of range");
    }
  }
  if (!prob_.z_rest.allFinite()) {
    throw std::invalid_argument("trajopt: non-finite initial state");
  }
}

inline void AlIlqrSolver::build_constraints() {
  const int n = prob_.horizon;
  n_ = n;
  state_cons_at_.assign(n, {});
  control_cons_at_.assign(n - 1, {});
  auto add = [&](const ConstraintRef& c) {
    const int id = static_cast<int>(cons_.size());
    cons_.push_back(c);
    if (c.on_state) {
      state_cons_at_[c.step].push_back(id);
    } else {
      control_cons_at_[c.step].push_back(id);
    }
  };
  for (int k = 0; k < n - 1; ++k) {
    for (int i = 0; i < kControlDim; ++i) {
      if (prob_.u_max(i) < kInf) add({false, false, k, i, prob_.u_max(i), 1.0});
      if (prob_.u_min(i) > -kInf) add({false, false, k, i, prob_.u_min(i), -1.0});
    }
  }
  // The initial state is pinned, so state constraints start at step 1.
  for (int k = 1; k < n; ++k) {
    for (const auto& b : prob_.state_bounds) {
      if (b.upper < kInf) add({true, false, k, b.index, b.upper, 1.0});
      if (b.lower > -kInf) add({true, false, k, b.index, b.lower, -1.0});
    }
  }
  for (const auto& e : prob_.equalities) {
    add({true, true, e.step, e.index, e.value, 1.0});
  }
  al_.lambda.assign(cons_.size(), 0.0);
  al_.mu.assign(cons_.size(), opts_.mu_init);
  al_.prev_violation.assign(cons_.size(), kInf);
  al_.is_equality.resize(cons_.size());
  for (size_t i = 0; i < cons_.size(); ++i) al_.is_equality[i] = cons_[i].equality;
}

inline std::optional<std::vector<AugState>> AlIlqrSolver::rollout_open(
    const std::vector<Control>& u) const {
  std::vector<AugState> z;
  z.reserve(n_);
  z.push_back(prob_.z_rest);
  for (int k = 0; k < n_ - 1; ++k) {
    const State x = predict(model_at(k), z.back(), u[k]);
    if (!x.allFinite()) return std::nullopt;
    z.push_back(shift(z.back(), x));
  }
  return z;
}

inline std::optional<std::pair<std::vector<AugState>, std::vector<Control>>>
AlIlqrSolver::rollout_closed(const std::vector<AugState>& z_ref,
                             const std::vector<Control>& u_ref, double alpha) const {
  std::vector<AugState> z;
  std::vector<Control> u(n_ - 1);
  z.reserve(n_);
  z.push_back(prob_.z_rest);
  for (int k = 0; k < n_ - 1; ++k) {
    u[k] = u_ref[k] + alpha * gain_d_[k] + gain_k_[k] * (z.back() - z_ref[k]);
    if (!u[k].allFinite()) return std::nullopt;
    const State x = predict(model_at(k), z.back(), u[k]);
    if (!x.allFinite()) return std::nullopt;
    z.push_back(shift(z.back(), x));
  }
  return std::make_pair(std::move(z), std::move(u));
}

inline double AlIlqrSolver::al_objective(const std::vector<AugState>& z,
                                         const std::vector<Control>& u) const {
  double j = cost(z, u, prob_);
  for (size_t i = 0; i < cons_.size(); ++i) {
    const double c = constraint_value(cons_[i], z, u);
    const double lam = al_.lambda[i];
    const double mu = al_.mu[i];
    if (cons_[i].equality) {
      j += lam * c + 0.5 * mu * c * c;
    } else {
      const double t = lam + mu * c;
      j += t > 0.0 ? (t * t - lam * lam) / (2.0 * mu) : -lam * lam / (2.0 * mu);
    }
  }
  return j;
}

inline void AlIlqrSolver::stage_expansion(int k, const AugState& z, AugVec& gx,
                                          AugVec& hx) const {
  const AugVec d = z - prob_.refs.z_bar[k];
  gx = 2.0 * prob_.q_diag.cwiseProduct(d);
  hx = 2.0 * prob_.q_diag;
  for (int id : state_cons_at_[k]) {
    const ConstraintRef& con = cons_[id];
    const double c = con.sign * (z(con.coord) - con.bound);
    const double lam = al_.lambda[id];
    const double mu = al_.mu[id];
    if (con.equality) {
      gx(con.coord) += (lam + mu * c) * con.sign;
      hx(con.coord) += mu;
    } else {
      const double t = lam + mu * c;
      if (t > 0.0) {
        gx(con.coord) += t * con.sign;
        hx(con.coord) += mu;
      }
    }
  }
}

inline void AlIlqrSolver::control_expansion(int k, const Control& u, Vec3& gu,
                                            Vec3& hu) const {
  const Vec3 d = u - prob_.refs.u_bar[k];
  gu = 2.0 * prob_.r_diag.cwiseProduct(d);
  hu = 2.0 * prob_.r_diag;
  for (int id : control_cons_at_[k]) {
    const ConstraintRef& con = cons_[id];
    const double c = con.sign * (u(con.coord) - con.bound);
    const double lam = al_.lambda[id];
    const double mu = al_.mu[id];
    if (con.equality) {
      gu(con.coord) += (lam + mu * c) * con.sign;
      hu(con.coord) += mu;
    } else {
      const double t = lam + mu * c;
      if (t > 0.0) {
        gu(con.coord) += t * con.sign;
        hu(con.coord) += mu;
      }
    }
  }
}

inline bool AlIlqrSolver::backward_pass(const std::vector<AugState>& z,
                                        const std::vector<Control>& u, double reg,
                                        double& d1, double& d2) {
  gain_k_.assign(n_ - 1, Gain::Zero());
  gain_d_.assign(n_ - 1, Control::Zero());
  d1 = 0.0;
  d2 = 0.0;
  AugVec gx, hx;
  stage_expansion(n_ - 1, z[n_ - 1], gx, hx);
  AugVec vx = gx;
  Fz vxx = hx.asDiagonal();
  for (int k = n_ - 2; k >= 0; --k) {
    const StepLinearization lin = linearize_step(model_at(k), z[k], u[k]);
    stage_expansion(k, z[k], gx, hx);
    Vec3 gu, hu;
    control_expansion(k, u[k], gu, hu);

    const AugVec qx = gx + lin.fz.transpose() * vx;
    const Vec3 qu = gu + lin.fu.transpose() * vx;
    Eigen::Matrix3d quu = hu.asDiagonal();
    quu += lin.fu.transpose() * vxx * lin.fu;
    Fz qxx = hx.asDiagonal();
    qxx += lin.fz.transpose() * vxx * lin.fz;
    const Eigen::Matrix<double, kControlDim, kAugDim> qux =
        lin.fu.transpose() * vxx * lin.fz;
    // Levenberg regularization of the value Hessian, folded into the
    // control blocks that the gains are solved from.
    const Eigen::Matrix3d quu_reg = quu + reg * lin.fu.transpose() * lin.fu;
    const Eigen::Matrix<double, kControlDim, kAugDim> qux_reg =
        qux + reg * lin.fu.transpose() * lin.fz;

    const Eigen::LLT<Eigen::Matrix3d> llt(quu_reg);
    if (llt.info() != Eigen::Success) return false;
    gain_k_[k] = -llt.solve(qux_reg);
    gain_d_[k] = -llt.solve(qu);

    const Gain& K = gain_k_[k];
    const Control& kd = gain_d_[k];
    vx = qx + K.transpose() * (quu * kd + qu) + qux.transpose() * kd;
    vxx = qxx + K.transpose() * quu * K + K.transpose() * qux +
          qux.transpose() * K;
    vxx = 0.5 * (vxx + vxx.transpose()).eval();

    d1 += kd.dot(qu);
    d2 += 0.5 * kd.dot(quu_reg * kd);
  }
  return true;
}

inline std::pair<Trajectory, SolveStats> AlIlqrSolver::run(std::vector<Control> u) {
  if (static_cast<int>(u.size()) != n_ - 1) {
    throw std::invalid_argument("trajopt: initial control sequence length mismatch");
  }
  SolveStats stats;
  Trajectory traj;
  traj.dt = prob_.refs.dt;

  auto z_opt = rollout_open(u);
  if (!z_opt) {
    stats.status = SolveStatus::kDiverged;
    traj.controls = std::move(u);
    return {std::move(traj), stats};
  }
  std::vector<AugState> z = std::move(*z_opt);

  std::vector<AugState> best_z = z;
  std::vector<Control> best_u = u;
  double best_viol = max_violation(all_constraint_values(z, u));
  double best_cost = cost(z, u, prob_);

  for (int outer = 0; outer < opts_.max_outer; ++outer) {
    double j = al_objective(z, u);
    stats.al_history.emplace_back();
    stats.al_history.back().push_back(j);

    double reg = opts_.reg_init;
    bool inner_done = false;
    for (int inner = 0; inner < opts_.max_inner && !inner_done; ++inner) {
      ++stats.inner_iterations;
      double d1 = 0.0, d2 = 0.0;
      while (!backward_pass(z, u, reg, d1, d2)) {
        reg *= opts_.reg_scale;
        if (reg > opts_.reg_max) break;
      }
      if (reg > opts_.reg_max) break;

      bool accepted = false;
      double alpha = 1.0;
      for (int ls = 0; ls < opts_.ls_steps; ++ls, alpha *= opts_.ls_factor) {
        auto cand = rollout_closed(z, u, alpha);
        if (!cand) continue;
        const double jc = al_objective(cand->first, cand->second);
        if (!std::isfinite(jc)) continue;
        const double expected = -(alpha * d1 + alpha * alpha * d2);
        const bool ok = expected > 0.0 ? (j - jc) >= opts_.armijo * expected
                                       : jc < j;
        if (!ok) continue;
        z = std::move(cand->first);
        u = std::move(cand->second);
        const double decrease = j - jc;
        j = jc;
        stats.al_history.back().push_back(j);
        reg = std::max(reg / opts_.reg_scale, opts_.reg_init);
        if (decrease <= opts_.cost_tol * std::max(1.0, std::abs(j))) inner_done = true;
        accepted = true;
        break;
      }
      if (!accepted) {
        // No step helped; if the model predicts essentially no improvement
        // we are at a stationary point, otherwise stiffen and retry.
        if (std::abs(d1 + d2) <= opts_.cost_tol * std::max(1.0, std::abs(j))) {
          inner_done = true;
          break;
        }
        reg *= opts_.reg_scale;
        if (reg > opts_.reg_max) break;
      }
    }

    ++stats.outer_iterations;
    const std::vector<double> c = all_constraint_values(z, u);
    const double viol = max_violation(c);
    const double true_cost = cost(z, u, prob_);
    stats.cost_history.push_back(true_cost);

    const bool feasible = viol <= opts_.constraint_tol;
    const bool best_feasible = best_viol <= opts_.constraint_tol;
    if ((feasible && (!best_feasible || true_cost < best_cost)) ||
        (!feasible && !best_feasible && viol < best_viol)) {
      best_z = z;
      best_u = u;
      best_viol = viol;
      best_cost = true_cost;
    }

    if (inner_done && viol < opts_.constraint_tol) {
      stats.converged = true;
      stats.status = SolveStatus::kConverged;
      break;
    }
    al_update(al_, c, opts_);
  }

  if (!stats.converged) stats.status = SolveStatus::kMaxIterations;
  stats.final_cost = best_cost;
  stats.max_violation = best_viol;
  traj.states = std::move(best_z);
  traj.controls = std::move(best_u);
  return {std::move(traj), stats};
}

}  // namespace detail

/// Solve the constrained tracking problem with an augmented-Lagrangian outer
/// loop around an iLQR inner loop. u_init defaults to the nominal commands.
inline std::pair<Trajectory, SolveStats> solve(const TrajOptProblem& prob,
                                               const std::vector<Control>& u_init = {},
                                               const SolverOptions& opts = {}) {
  detail::AlIlqrSolver solver(prob, opts);
  return solver.run(u_init.empty() ? prob.refs.u_bar : u_init);
}

}  // namespace vinetraj::trajopt
