#include "vinetraj/model.hpp"

#include <gtest/gtest.h>

#include <random>

namespace vinetraj {
namespace {

using sysid::num_quadratic_features;
using sysid::pair_feature_from_index;
using sysid::pair_feature_index;
using sysid::quadratic_features;

TEST(Features, CountMatchesClosedForm) {
  EXPECT_EQ(num_quadratic_features(30), 496);
  EXPECT_EQ(num_quadratic_features(3), 10);
  EXPECT_EQ(num_quadratic_features(2), 6);
  AugState z = AugState::Zero();
  Control u = Control::Zero();
  EXPECT_EQ(quadratic_features(z, u).size(), 496);
}

TEST(Features, SmallVectorOrdering) {
  Eigen::VectorXd w(3);
  w << 2.0, 3.0, 5.0;
  const Eigen::VectorXd f = quadratic_features(w);
  ASSERT_EQ(f.size(), 10);
  const double want[10] = {1, 2, 3, 5, 4, 9, 25, 6, 10, 15};
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(f(i), want[i]) << "feature " << i;
}

TEST(Features, ZeroInputKeepsOnlyTheOffset) {
  const Eigen::VectorXd f = quadratic_features(Eigen::VectorXd::Zero(30));
  EXPECT_DOUBLE_EQ(f(0), 1.0);
  EXPECT_EQ(f.tail(f.size() - 1).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Features, PairIndexRoundTrips) {
  const int n = 30;
  int expected = 1 + 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const int flat = pair_feature_index(i, j, n);
      EXPECT_EQ(flat, expected) << "(" << i << "," << j << ")";
      const auto [ri, rj] = pair_feature_from_index(flat, n);
      EXPECT_EQ(ri, i);
      EXPECT_EQ(rj, j);
      ++expected;
    }
  }
  EXPECT_EQ(expected, num_quadratic_features(n));
  EXPECT_THROW(pair_feature_from_index(0, n), std::invalid_argument);
  EXPECT_THROW(pair_feature_from_index(num_quadratic_features(n), n),
               std::invalid_argument);
}

TEST(Features, PairIndexAddressesTheRightProduct) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXd w(30);
  for (int i = 0; i < 30; ++i) w(i) = nd(rng);
  const Eigen::VectorXd f = quadratic_features(w);
  EXPECT_DOUBLE_EQ(f(pair_feature_index(0, 1, 30)), w(0) * w(1));
  EXPECT_DOUBLE_EQ(f(pair_feature_index(4, 17, 30)), w(4) * w(17));
  EXPECT_DOUBLE_EQ(f(pair_feature_index(28, 29, 30)), w(28) * w(29));
}

TEST(Features, EvalAndGradMatchTheFeatureVector) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> nd(0.0, 1.0);
  const int n = 30;
  Eigen::VectorXd a(num_quadratic_features(n));
  for (int i = 0; i < a.size(); ++i) a(i) = nd(rng);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) w(i) = nd(rng);

  const double direct = a.dot(quadratic_features(w));
  EXPECT_NEAR(sysid::quadratic_eval(a, w), direct, 1e-12 * std::abs(direct) + 1e-12);

  Eigen::VectorXd g(n);
  sysid::quadratic_grad(a, w, g);
  const double h = 1e-6;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd wp = w, wm = w;
    wp(i) += h;
    wm(i) -= h;
    const double fd =
        (sysid::quadratic_eval(a, wp) - sysid::quadratic_eval(a, wm)) / (2.0 * h);
    EXPECT_NEAR(g(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

DynModel random_model(std::mt19937_64& rng, double a_scale = 0.05) {
  std::normal_distribution<double> nd(0.0, 1.0);
  DynModel m;
  for (int r = 0; r < kStateDim; ++r) {
    for (int c = 0; c < kAugDim; ++c) m.A(r, c) = 0.05 * nd(rng);
    for (int c = 0; c < kControlDim; ++c) m.B(r, c) = 0.3 * nd(rng);
  }
  for (int i = 0; i < m.a.size(); ++i) m.a(i) = a_scale * nd(rng);
  m.cfg = {0.0, 0.7};
  return m;
}

TEST(Predict, LinearChannelsMatchTheDesignRow) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  const DynModel m = random_model(rng);
  AugState z;
  Control u;
  for (int i = 0; i < kAugDim; ++i) z(i) = nd(rng);
  for (int i = 0; i < kControlDim; ++i) u(i) = nd(rng);
  const State x = predict(m, z, u);
  const State lin = m.A * z + m.B * u;
  for (int i = 0; i < kStateDim; ++i) {
    if (i == kEeHeightIdx) continue;
    EXPECT_EQ(x(i), lin(i)) << "channel " << i;
  }
  EXPECT_NEAR(x(kEeHeightIdx), m.a.dot(quadratic_features(z, u)), 1e-12);
}

TEST(Predict, UnknownFeatureVersionIsRejected) {
  std::mt19937_64 rng(6);
  DynModel m = random_model(rng);
  m.feature_version = 2;
  EXPECT_THROW(predict(m, AugState::Zero(), Control::Zero()), std::runtime_error);
  EXPECT_THROW(jacobians(m, AugState::Zero(), Control::Zero()), std::runtime_error);
}

TEST(Jacobians, MatchCentralDifferences) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd(0.0, 1.0);
  const DynModel m = random_model(rng);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    AugState z;
    Control u;
    for (int i = 0; i < kAugDim; ++i) z(i) = nd(rng);
    for (int i = 0; i < kControlDim; ++i) u(i) = nd(rng);
    const StepJacobians jac = jacobians(m, z, u);
    double scale = std::max(jac.dz.cwiseAbs().maxCoeff(), jac.du.cwiseAbs().maxCoeff());
    scale = std::max(scale, 1.0);
    for (int c = 0; c < kAugDim; ++c) {
      AugState zp = z, zm = z;
      zp(c) += h;
      zm(c) -= h;
      const State fd = (predict(m, zp, u) - predict(m, zm, u)) / (2.0 * h);
      EXPECT_LT((jac.dz.col(c) - fd).cwiseAbs().maxCoeff(), 1e-5 * scale);
    }
    for (int c = 0; c < kControlDim; ++c) {
      Control up = u, um = u;
      up(c) += h;
      um(c) -= h;
      const State fd = (predict(m, z, up) - predict(m, z, um)) / (2.0 * h);
      EXPECT_LT((jac.du.col(c) - fd).cwiseAbs().maxCoeff(), 1e-5 * scale);
    }
  }
}

TEST(Rollout, KeepsTheShiftStructureBitExact) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(0.0, 1.0);
  const DynModel m = random_model(rng, 0.01);
  AugState z0;
  for (int i = 0; i < kAugDim; ++i) z0(i) = 0.3 * nd(rng);
  std::vector<Control> u;
  for (int k = 0; k < 30; ++k) u.emplace_back(nd(rng), nd(rng), nd(rng));
  const Trajectory traj = rollout(m, z0, u);
  ASSERT_EQ(traj.states.size(), 31u);
  EXPECT_EQ((traj.states[0] - z0).cwiseAbs().maxCoeff(), 0.0);
  for (size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const AugState& cur = traj.states[k];
    const AugState& next = traj.states[k + 1];
    EXPECT_EQ((next.tail<2 * kStateDim>() - cur.head<2 * kStateDim>())
                  .cwiseAbs()
                  .maxCoeff(),
              0.0);
    const State x = predict(m, cur, u[k]);
    EXPECT_EQ((next.head<kStateDim>() - x).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Rollout, ScheduleMustMatchControls) {
  std::mt19937_64 rng(9);
  const DynModel m = random_model(rng);
  const std::vector<Control> u(5, Control::Zero());
  EXPECT_THROW(rollout(std::vector<DynModel>(4, m), AugState::Zero(), u),
               std::invalid_argument);
  EXPECT_NO_THROW(rollout(std::vector<DynModel>(5, m), AugState::Zero(), u));
  AugState bad = AugState::Zero();
  bad(0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(rollout(m, bad, u), std::invalid_argument);
}

TEST(Rollout, DivergenceIsReported) {
  DynModel m;
  m.A(0, 0) = 1e3;  // blows up from any nonzero start
  AugState z0 = AugState::Zero();
  z0(0) = 1.0;
  const std::vector<Control> u(300, Control::Zero());
  EXPECT_THROW(rollout(m, z0, u), std::runtime_error);
}

TEST(InterpWeights, CornersAndCenter) {
  const CornerWeights es = interp_weights({kPressureMin, kLengthMin});
  EXPECT_DOUBLE_EQ(es.es, 1.0);
  EXPECT_DOUBLE_EQ(es.is, 0.0);
  EXPECT_DOUBLE_EQ(es.el, 0.0);
  EXPECT_DOUBLE_EQ(es.il, 0.0);
  const CornerWeights is = interp_weights({kPressureMax, kLengthMin});
  EXPECT_DOUBLE_EQ(is.is, 1.0);
  const CornerWeights el = interp_weights({kPressureMin, kLengthMax});
  EXPECT_DOUBLE_EQ(el.el, 1.0);
  const CornerWeights il = interp_weights({kPressureMax, kLengthMax});
  EXPECT_DOUBLE_EQ(il.il, 1.0);

  const CornerWeights mid = interp_weights({0.2, 0.85});
  EXPECT_NEAR(mid.es, 0.25, 1e-15);
  EXPECT_NEAR(mid.is, 0.25, 1e-15);
  EXPECT_NEAR(mid.el, 0.25, 1e-15);
  EXPECT_NEAR(mid.il, 0.25, 1e-15);
}

TEST(InterpWeights, PartitionOfUnityInsideTheRectangle) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> up(kPressureMin, kPressureMax);
  std::uniform_real_distribution<double> ul(kLengthMin, kLengthMax);
  for (int i = 0; i < 100; ++i) {
    const CornerWeights w = interp_weights({up(rng), ul(rng)});
    EXPECT_NEAR(w.es + w.is + w.el + w.il, 1.0, 1e-15);
    EXPECT_GE(w.es, 0.0);
    EXPECT_GE(w.is, 0.0);
    EXPECT_GE(w.el, 0.0);
    EXPECT_GE(w.il, 0.0);
  }
}

TEST(InterpWeights, NoExtrapolation) {
  EXPECT_THROW(interp_weights({0.41, 0.8}), std::domain_error);
  EXPECT_THROW(interp_weights({-0.01, 0.8}), std::domain_error);
  EXPECT_THROW(interp_weights({0.2, 0.69}), std::domain_error);
  EXPECT_THROW(interp_weights({0.2, 1.01}), std::domain_error);
}

CornerSet random_corners(std::mt19937_64& rng) {
  CornerSet cs;
  cs.es = random_model(rng);
  cs.is = random_model(rng);
  cs.el = random_model(rng);
  cs.il = random_model(rng);
  cs.es.cfg = {kPressureMin, kLengthMin};
  cs.is.cfg = {kPressureMax, kLengthMin};
  cs.el.cfg = {kPressureMin, kLengthMax};
  cs.il.cfg = {kPressureMax, kLengthMax};
  return cs;
}

TEST(Interpolate, ParameterBlendEqualsPredictionBlend) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 1.0);
  const CornerSet cs = random_corners(rng);
  std::uniform_real_distribution<double> up(kPressureMin, kPressureMax);
  std::uniform_real_distribution<double> ul(kLengthMin, kLengthMax);
  for (int trial = 0; trial < 20; ++trial) {
    const VineConfig cfg{up(rng), ul(rng)};
    const DynModel blended = interpolate(cs, cfg);
    const CornerWeights w = interp_weights(cfg);
    AugState z;
    Control u;
    for (int i = 0; i < kAugDim; ++i) z(i) = nd(rng);
    for (int i = 0; i < kControlDim; ++i) u(i) = nd(rng);
    const State direct = predict(blended, z, u);
    const State mix = w.es * predict(cs.es, z, u) + w.is * predict(cs.is, z, u) +
                      w.el * predict(cs.el, z, u) + w.il * predict(cs.il, z, u);
    EXPECT_LT((direct - mix).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Interpolate, RecoversTheCornersExactly) {
  std::mt19937_64 rng(12);
  const CornerSet cs = random_corners(rng);
  const DynModel at_es = interpolate(cs, {kPressureMin, kLengthMin});
  EXPECT_EQ((at_es.A - cs.es.A).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((at_es.B - cs.es.B).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ((at_es.a - cs.es.a).cwiseAbs().maxCoeff(), 0.0);
  const DynModel at_il = interpolate(cs, {kPressureMax, kLengthMax});
  EXPECT_EQ((at_il.A - cs.il.A).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Interpolate, ValidatesTheCornerSet) {
  std::mt19937_64 rng(13);
  CornerSet cs = random_corners(rng);
  cs.is.cfg.pressure_kpa = 0.3;  // not at its corner
  EXPECT_THROW(interpolate(cs, {0.2, 0.85}), std::invalid_argument);
  cs = random_corners(rng);
  cs.el.dt = 0.1;
  EXPECT_THROW(interpolate(cs, {0.2, 0.85}), std::invalid_argument);
  cs = random_corners(rng);
  EXPECT_THROW(interpolate(cs, {0.41, 0.85}), std::domain_error);
}

}  // namespace
}  // namespace vinetraj
