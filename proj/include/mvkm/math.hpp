#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace mvkm {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  using std::exp;
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + exp(-x));
  const Scalar e = exp(x);
  return e / (Scalar(1) + e);
}

/// log(sigmoid(x)) without overflow for large |x|.
template <typename Scalar>
Scalar log_sigmoid(Scalar x) {
  using std::exp;
  using std::log1p;
  if (x >= Scalar(0)) return -log1p(exp(-x));
  return x - log1p(exp(x));
}

/// Euclidean projection of `v` onto the probability simplex
/// { w : w >= 0, sum(w) = 1 } by the sort-and-threshold method.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> project_simplex(
    const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Eigen::Index n = v.size();
  Vector out(n);
  if (n == 0) return out;

  std::vector<Scalar> sorted(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = v(i);
  std::sort(sorted.begin(), sorted.end(), std::greater<Scalar>());

  Scalar running = Scalar(0);
  Scalar theta = Scalar(0);
  for (std::size_t j = 0; j < sorted.size(); ++j) {
    running += sorted[j];
    const Scalar candidate = (running - Scalar(1)) / static_cast<Scalar>(j + 1);
    if (sorted[j] - candidate > Scalar(0)) theta = candidate;
  }
  for (Eigen::Index i = 0; i < n; ++i) out(i) = std::max(v(i) - theta, Scalar(0));
  return out;
}

/// True when `v` is nonnegative and sums to one within `tol`.
template <typename Derived>
bool on_simplex(const Eigen::MatrixBase<Derived>& v, typename Derived::Scalar tol) {
  if (!v.allFinite()) return false;
  if ((v.array() < -tol).any()) return false;
  using std::abs;
  return abs(v.sum() - typename Derived::Scalar(1)) <= tol;
}

}  // namespace mvkm
