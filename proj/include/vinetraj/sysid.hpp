#pragma once

#include "vinetraj/core.hpp"
#include "vinetraj/features.hpp"
#include "vinetraj/model.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace vinetraj::sysid {

inline constexpr double kDefaultRidge = 1e-8;

struct DatasetRow {
  AugState z;
  Control u;
  State x_next;
};

struct Dataset {
  std::vector<DatasetRow> rows;
  // [begin, end) row ranges contributed by each usable source log, in order.
  std::vector<std::pair<int, int>> log_spans;
  VineConfig source_config;
  double dt = kDt;
  std::vector<std::string> warnings;
};

/// Turn flight logs into regression rows. Each log contributes one row per
/// step that has two predecessors and a successor, so a log with M rows
/// yields M - 3 dataset rows; logs are never stitched across boundaries.
inline Dataset build_dataset(const std::vector<FlightLog>& logs) {
  if (logs.empty()) throw std::invalid_argument("build_dataset: no logs given");
  Dataset ds;
  ds.dt = logs.front().dt;
  ds.source_config = logs.front().cfg;
  for (size_t li = 0; li < logs.size(); ++li) {
    const FlightLog& log = logs[li];
    if (log.states.size() != log.controls.size()) {
      throw std::invalid_argument("build_dataset: log states/controls length mismatch");
    }
    if (log.dt != ds.dt) {
      throw std::invalid_argument("build_dataset: logs disagree on dt");
    }
    const int m = static_cast<int>(log.states.size());
    if (m < 4) {
      ds.warnings.push_back("log " + std::to_string(li) +
                            " skipped: too short to form any training row");
      continue;
    }
    const int begin = static_cast<int>(ds.rows.size());
    for (int k = 2; k + 1 < m; ++k) {
      DatasetRow row;
      row.z = augment(log.states[k], log.states[k - 1], log.states[k - 2]);
      row.u = log.controls[k];
      row.x_next = log.states[k + 1];
      ds.rows.push_back(row);
    }
    ds.log_spans.emplace_back(begin, static_cast<int>(ds.rows.size()));
  }
  if (ds.rows.empty()) {
    throw std::invalid_argument("build_dataset: no usable rows in any log");
  }
  return ds;
}

struct LinearFit {
  Eigen::Matrix<double, kStateDim, kAugDim> A;
  Eigen::Matrix<double, kStateDim, kControlDim> B;
};

namespace detail {

// Ridge-stabilized least squares through a rank-revealing QR of the stacked
// design matrix. Never forms the normal equations. Columns listed in
// unpenalized are excluded from the ridge (the intercept).
inline Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& design,
                                   const Eigen::MatrixXd& targets, double ridge,
                                   int unpenalized_col = -1) {
  const int p = static_cast<int>(design.cols());
  const int rows = static_cast<int>(design.rows());
  const int arows = rows + (ridge > 0.0 ? p : 0);
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(arows, p);
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(arows, targets.cols());
  phi.topRows(rows) = design;
  y.topRows(rows) = targets;
  if (ridge > 0.0) {
    const double s = std::sqrt(ridge);
    for (int c = 0; c < p; ++c) {
      if (c == unpenalized_col) continue;
      phi(rows + c, c) = s;
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(phi);
  if (ridge == 0.0 && qr.rank() < p) {
    throw std::runtime_error(
        "fit: rank-deficient regressors; add excitation or use a nonzero ridge");
  }
  return qr.solve(y);
}

}  // namespace detail

/// Fit the linear map [A B] jointly over all nine output channels.
inline LinearFit fit_linear(const Dataset& data, double ridge = kDefaultRidge) {
  const int p = kAugDim + kControlDim;
  const int rows = static_cast<int>(data.rows.size());
  if (rows < p) {
    throw std::invalid_argument("fit_linear: need at least 30 rows");
  }
  if (ridge < 0.0) throw std::invalid_argument("fit_linear: ridge must be >= 0");
  Eigen::MatrixXd phi(rows, p);
  Eigen::MatrixXd y(rows, kStateDim);
  for (int i = 0; i < rows; ++i) {
    phi.row(i).head<kAugDim>() = data.rows[i].z.transpose();
    phi.row(i).tail<kControlDim>() = data.rows[i].u.transpose();
    y.row(i) = data.rows[i].x_next.transpose();
  }
  const Eigen::MatrixXd theta = detail::ridge_solve(phi, y, ridge);
  LinearFit fit;
  fit.A = theta.topRows(kAugDim).transpose();
  fit.B = theta.bottomRows(kControlDim).transpose();
  return fit;
}

/// Fit the quadratic polynomial for the end effector height channel. The
/// intercept is never penalized.
inline Eigen::VectorXd fit_tip_height(const Dataset& data, double ridge = kDefaultRidge) {
  const int p = num_quadratic_features(kAugDim + kControlDim);
  const int rows = static_cast<int>(data.rows.size());
  if (ridge < 0.0) throw std::invalid_argument("fit_tip_height: ridge must be >= 0");
  if (ridge == 0.0 && rows < p) {
    throw std::invalid_argument(
        "fit_tip_height: need at least as many rows as features when unregularized");
  }
  if (rows == 0) throw std::invalid_argument("fit_tip_height: empty dataset");
  Eigen::MatrixXd phi(rows, p);
  Eigen::MatrixXd y(rows, 1);
  for (int i = 0; i < rows; ++i) {
    phi.row(i) = quadratic_features(data.rows[i].z, data.rows[i].u).transpose();
    y(i, 0) = data.rows[i].x_next(kEeHeightIdx);
  }
  return detail::ridge_solve(phi, y, ridge, /*unpenalized_col=*/0).col(0);
}

/// Fit a full model (linear channels + quadratic height channel) from logs
/// recorded at one configuration.
inline DynModel fit_config_model(const std::vector<FlightLog>& logs,
                                 const VineConfig& cfg, double ridge = kDefaultRidge) {
  const Dataset ds = build_dataset(logs);
  const LinearFit lin = fit_linear(ds, ridge);
  DynModel m;
  m.A = lin.A;
  m.B = lin.B;
  m.a = fit_tip_height(ds, ridge);
  m.cfg = cfg;
  m.dt = ds.dt;
  return m;
}

struct FitReport {
  Eigen::Matrix<double, kStateDim, 1> one_step_rmse =
      Eigen::Matrix<double, kStateDim, 1>::Zero();
  // sqrt(mean squared 3D end effector error) over one-step predictions.
  double ee_rmse = 0.0;
  // Steps until an open-loop rollout drifts more than 0.5 m from the logged
  // end effector track, minimized over the source logs.
  int divergence_horizon = 0;
  double condition_number = 0.0;
};

/// One-step and rollout diagnostics of a model against a (typically held
/// out) dataset.
inline FitReport validate(const DynModel& m, const Dataset& data) {
  if (data.rows.empty()) throw std::invalid_argument("validate: empty dataset");
  if (m.dt != data.dt) throw std::invalid_argument("validate: model/data dt mismatch");
  FitReport rep;
  Eigen::Matrix<double, kStateDim, 1> sq = Eigen::Matrix<double, kStateDim, 1>::Zero();
  for (const auto& row : data.rows) {
    const State err = predict(m, row.z, row.u) - row.x_next;
    sq += err.cwiseAbs2();
  }
  rep.one_step_rmse = (sq / static_cast<double>(data.rows.size())).cwiseSqrt();
  rep.ee_rmse = rep.one_step_rmse.segment<3>(kEePosIdx).norm();

  constexpr double kDivergeDist = 0.5;
  int horizon = data.rows.empty() ? 0 : std::numeric_limits<int>::max();
  for (const auto& [begin, end] : data.log_spans) {
    AugState z = data.rows[begin].z;
    int steps = end - begin;
    int h = steps;
    for (int i = begin; i < end; ++i) {
      const State x = predict(m, z, data.rows[i].u);
      if (!x.allFinite() ||
          (ee_pos(x) - ee_pos(data.rows[i].x_next)).norm() > kDivergeDist) {
        h = i - begin;
        break;
      }
      z = shift(z, x);
    }
    horizon = std::min(horizon, h);
  }
  rep.divergence_horizon = horizon;

  const int rows = static_cast<int>(data.rows.size());
  Eigen::MatrixXd phi(rows, kAugDim + kControlDim);
  for (int i = 0; i < rows; ++i) {
    phi.row(i).head<kAugDim>() = data.rows[i].z.transpose();
    phi.row(i).tail<kControlDim>() = data.rows[i].u.transpose();
  }
  const Eigen::VectorXd sv = phi.jacobiSvd().singularValues();
  const double smin = sv(sv.size() - 1);
  rep.condition_number = smin > 0.0 ? sv(0) / smin
                                    : std::numeric_limits<double>::infinity();
  return rep;
}

}  // namespace vinetraj::sysid
