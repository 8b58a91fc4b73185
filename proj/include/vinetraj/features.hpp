#pragma once

#include "vinetraj/core.hpp"

#include <utility>

namespace vinetraj::sysid {

// Bump this whenever the feature ordering below changes; stored with every
// fitted model so stale coefficient files cannot be evaluated silently.
inline constexpr int kFeatureVersion = 1;

inline constexpr int num_quadratic_features(int n) {
  return 1 + 2 * n + n * (n - 1) / 2;
}

// Feature layout for an input w of length n:
//   [ 1, w_0 .. w_{n-1}, w_0^2 .. w_{n-1}^2, w_i * w_j for i < j ]
// with the cross terms in lexicographic (i, j) order.
inline constexpr int pair_feature_index(int i, int j, int n) {
  return 1 + 2 * n + i * (2 * n - i - 1) / 2 + (j - i - 1);
}

inline std::pair<int, int> pair_feature_from_index(int flat, int n) {
  int rem = flat - (1 + 2 * n);
  if (rem < 0) throw std::invalid_argument("pair_feature_from_index: not a cross term");
  for (int i = 0; i < n - 1; ++i) {
    const int count = n - 1 - i;
    if (rem < count) return {i, i + 1 + rem};
    rem -= count;
  }
  throw std::invalid_argument("pair_feature_from_index: index out of range");
}

inline Eigen::VectorXd quadratic_features(const Eigen::VectorXd& w) {
  const int n = static_cast<int>(w.size());
  Eigen::VectorXd f(num_quadratic_features(n));
  f(0) = 1.0;
  f.segment(1, n) = w;
  f.segment(1 + n, n) = w.array().square();
  int idx = 1 + 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) f(idx++) = w(i) * w(j);
  }
  return f;
}

inline Eigen::VectorXd quadratic_features(const AugState& z, const Control& u) {
  Eigen::VectorXd w(kAugDim + kControlDim);
  w << z, u;
  return quadratic_features(w);
}

/// a . quadratic_features(w) without materializing the feature vector.
template <class WVec>
inline double quadratic_eval(const Eigen::VectorXd& a, const WVec& w) {
  const int n = static_cast<int>(w.size());
  double val = a(0);
  for (int i = 0; i < n; ++i) val += a(1 + i) * w(i) + a(1 + n + i) * w(i) * w(i);
  int idx = 1 + 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) val += a(idx++) * w(i) * w(j);
  }
  return val;
}

/// Gradient of a . quadratic_features(w) with respect to w.
template <class WVec, class GVec>
inline void quadratic_grad(const Eigen::VectorXd& a, const WVec& w, GVec& grad) {
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) grad(i) = a(1 + i) + 2.0 * a(1 + n + i) * w(i);
  int idx = 1 + 2 * n;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      grad(i) += a(idx) * w(j);
      grad(j) += a(idx) * w(i);
      ++idx;
    }
  }
}

}  // namespace vinetraj::sysid
