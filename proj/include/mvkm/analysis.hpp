#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/model.hpp"

namespace mvkm {

/// Mean knowledge per attempt: values(a, j) is the average of K[s, concepts[j], a]
/// over the selected students.
struct CurveTable {
  std::vector<Index> concepts;
  Eigen::MatrixXd values;  // attempts x concepts
};

CurveTable knowledge_curves(const ModelParams& params, std::span<const Index> concepts,
                            std::span<const Index> students);
/// Every concept, every student.
CurveTable knowledge_curves(const ModelParams& params);

/// Header `attempt,c<j>...`, one row per attempt.
std::string curves_to_csv(const CurveTable& curves);

/// Fraction of consecutive attempt pairs, over all concepts, whose curve
/// value does not drop.
double nondecreasing_fraction(const CurveTable& curves);

/// 1-based ranks; tied values share the mean of their positions.
template <typename Derived>
Eigen::VectorXd average_ranks(const Eigen::MatrixBase<Derived>& x) {
  const Index n = x.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x(a) < x(b); });
  Eigen::VectorXd ranks(n);
  for (Index i = 0; i < n;) {
    Index j = i;
    while (j + 1 < n && x(order[static_cast<std::size_t>(j + 1)]) == x(order[static_cast<std::size_t>(i)])) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Index t = i; t <= j; ++t) ranks(order[static_cast<std::size_t>(t)]) = rank;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation (Pearson on average ranks).
template <typename DerivedX, typename DerivedY>
double spearman(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) throw ArgumentError("spearman: length mismatch");
  if (x.size() < 2) throw ArgumentError("spearman: need at least two observations");
  Eigen::VectorXd rx = average_ranks(x);
  Eigen::VectorXd ry = average_ranks(y);
  rx.array() -= rx.mean();
  ry.array() -= ry.mean();
  const double denom = std::sqrt(rx.squaredNorm() * ry.squaredNorm());
  if (denom == 0.0) throw DegenerateInputError("spearman: constant input has no rank order");
  return std::clamp(rx.dot(ry) / denom, -1.0, 1.0);
}

struct ClusterAssignment {
  std::vector<std::string> ids;
  std::vector<int> labels;
  int num_clusters = 0;
  std::string affinity;
};

struct SpectralOptions {
  int restarts = 10;
  int max_iterations = 100;
};

/// Normalized spectral clustering of the rows of `features`.
///
/// Affinity is cosine similarity clamped at 0 with a zero diagonal. The k
/// eigenvectors of I - D^-1/2 A D^-1/2 with the smallest eigenvalues are
/// row-normalized and grouped by k-means. Labels are numbered in order of
/// first appearance. `ids` defaults to row indices.
ClusterAssignment spectral_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                                   std::vector<std::string> ids = {},
                                   const SpectralOptions& options = {});

template <typename Derived>
ClusterAssignment spectral_cluster(const Eigen::MatrixBase<Derived>& features, int k, std::uint64_t seed,
                                   std::vector<std::string> ids = {}) {
  return spectral_cluster(Eigen::MatrixXd(features.template cast<double>()), k, seed, std::move(ids));
}

/// Clusters rows of S.
ClusterAssignment student_clusters(const ModelParams& params, const std::vector<std::string>& student_ids,
                                   int k, std::uint64_t seed);

/// Clusters the Q columns of `views` side by side; ids read `<view name>/<material id>`.
ClusterAssignment material_clusters(const ModelParams& params, const std::vector<ViewSpec>& specs,
                                    std::span<const int> views, int k, std::uint64_t seed);

/// Spearman correlation of b_p in `view` against each material's mean observed
/// score. Materials without observations are skipped.
double bias_score_correlation(const ModelParams& params, const Dataset& ds, int view);

struct ClusterScore {
  int cluster = 0;
  std::size_t members = 0;
  std::size_t observations = 0;
  double mean_score = 0.0;
};

/// Mean observed `view` score of the students in each cluster; `assignment`
/// labels students in index order.
std::vector<ClusterScore> cluster_score_table(const ClusterAssignment& assignment, const Dataset& ds,
                                              int view);

std::string clusters_to_csv(const ClusterAssignment& assignment);
std::string cluster_scores_to_csv(const std::vector<ClusterScore>& table);

}  // namespace mvkm
