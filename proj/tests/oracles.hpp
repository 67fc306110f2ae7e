#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/model.hpp"

// Loop-based reference implementations, written without the library's
// vectorized helpers.
namespace mvkm::testing {

inline double raw_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double trilinear_loops(const ModelParams& p, Index s, Index a, Index m, int r) {
  double sum = 0.0;
  for (Index k = 0; k < p.S.cols(); ++k) {
    for (Index c = 0; c < p.Q[r].rows(); ++c) sum += p.S(s, k) * p.T[a](k, c) * p.Q[r](c, m);
  }
  return sum;
}

inline double prediction_loops(const ModelParams& p, const InteractionRecord& x) {
  const int slot = p.shared_attempt_bias ? 0 : x.view;
  const double affine = trilinear_loops(p, x.student, x.attempt, x.material, x.view) + p.b_s(x.student) +
                        p.b_p[x.view](x.material) + p.b_a[slot](x.attempt);
  return p.view_graded[x.view] ? affine : raw_sigmoid(affine + p.mu);
}

inline double penalty_loops(const ModelParams& p, const InteractionRecord& x, int m) {
  double sum = 0.0;
  for (Index j = std::max<Index>(0, x.attempt - m); j < x.attempt; ++j) {
    const double d = trilinear_loops(p, x.student, x.attempt, x.material, x.view) -
                     trilinear_loops(p, x.student, j, x.material, x.view);
    sum += std::log(raw_sigmoid(d));
  }
  return sum;
}

inline double squares(const Eigen::MatrixXd& m) {
  double sum = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) sum += m(i, j) * m(i, j);
  }
  return sum;
}

inline double objective_loops(const ModelParams& p, const std::vector<InteractionRecord>& records, const HyperParams& hp) {
  double l1 = 0.0;
  double l2 = 0.0;
  for (const auto& x : records) {
    const double e = prediction_loops(p, x) - x.value;
    l1 += hp.gamma[x.view] * e * e;
    if (hp.omega != 0.0) l2 += penalty_loops(p, x, hp.markov_step);
  }
  for (const auto& t : p.T) l1 += hp.lambda_t * squares(t);
  l1 += hp.lambda_s * squares(p.S);
  return l1 - hp.omega * l2;
}

inline double batch_loss_loops(const ModelParams& p, const std::vector<InteractionRecord>& batch, const HyperParams& hp) {
  double loss = 0.0;
  std::set<Index> students;
  std::set<Index> attempts;
  for (const auto& x : batch) {
    const double e = prediction_loops(p, x) - x.value;
    loss += hp.gamma[x.view] * e * e - hp.omega * penalty_loops(p, x, hp.markov_step);
    students.insert(x.student);
    attempts.insert(x.attempt);
  }
  for (Index a : attempts) loss += hp.lambda_t * squares(p.T[a]);
  for (Index s : students) loss += hp.lambda_s * squares(p.S.row(s));
  return loss;
}

template <typename Loss>
inline Eigen::VectorXd central_difference(const ModelParams& params, Loss loss, double h = 1e-5) {
  ModelParams work = params;
  const Eigen::VectorXd x = flatten(params);
  Eigen::VectorXd g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x;
    xp(i) += h;
    unflatten(xp, work);
    const double fp = loss(work);
    xp(i) -= 2.0 * h;
    unflatten(xp, work);
    g(i) = (fp - loss(work)) / (2.0 * h);
  }
  return g;
}

/// Largest coordinate error scaled by max(1, |analytic|, |numeric|).
inline double scaled_max_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  double worst = 0.0;
  for (Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({1.0, std::abs(analytic(i)), std::abs(numeric(i))});
    worst = std::max(worst, std::abs(analytic(i) - numeric(i)) / scale);
  }
  return worst;
}

}  // namespace mvkm::testing
