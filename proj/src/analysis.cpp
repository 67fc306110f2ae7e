#include "mvkm/analysis.hpp"

#include <limits>
#include <map>

#include <Eigen/Eigenvalues>

#include "mvkm/format.hpp"
#include "mvkm/rng.hpp"

namespace mvkm {

CurveTable knowledge_curves(const ModelParams& params, std::span<const Index> concepts,
                            std::span<const Index> students) {
  if (concepts.empty()) throw ArgumentError("knowledge_curves: empty concept selection");
  if (students.empty()) throw ArgumentError("knowledge_curves: empty student selection");
  for (Index c : concepts) {
    if (c < 0 || c >= params.num_concepts()) throw ArgumentError("knowledge_curves: concept out of range");
  }
  for (Index s : students) {
    if (s < 0 || s >= params.num_students()) throw ArgumentError("knowledge_curves: student out of range");
  }

  Eigen::RowVectorXd mean_s = Eigen::RowVectorXd::Zero(params.latent_dim());
  for (Index s : students) mean_s += params.S.row(s);
  mean_s /= static_cast<double>(students.size());

  CurveTable out;
  out.concepts.assign(concepts.begin(), concepts.end());
  out.values.resize(params.num_attempts(), static_cast<Index>(concepts.size()));
  for (Index a = 0; a < params.num_attempts(); ++a) {
    const Eigen::RowVectorXd k = mean_s * params.T[static_cast<std::size_t>(a)];
    for (std::size_t j = 0; j < concepts.size(); ++j) out.values(a, static_cast<Index>(j)) = k(concepts[j]);
  }
  return out;
}

CurveTable knowledge_curves(const ModelParams& params) {
  std::vector<Index> concepts(static_cast<std::size_t>(params.num_concepts()));
  std::vector<Index> students(static_cast<std::size_t>(params.num_students()));
  std::iota(concepts.begin(), concepts.end(), Index{0});
  std::iota(students.begin(), students.end(), Index{0});
  return knowledge_curves(params, concepts, students);
}

std::string curves_to_csv(const CurveTable& curves) {
  std::string out = "attempt";
  for (Index c : curves.concepts) out += ",c" + std::to_string(c);
  out += '\n';
  for (Index a = 0; a < curves.values.rows(); ++a) {
    out += std::to_string(a);
    for (Index j = 0; j < curves.values.cols(); ++j) out += "," + format_double(curves.values(a, j));
    out += '\n';
  }
  return out;
}

double nondecreasing_fraction(const CurveTable& curves) {
  const Index steps = curves.values.rows() - 1;
  if (steps < 1 || curves.values.cols() == 0) throw ArgumentError("nondecreasing_fraction: need two attempts");
  Index up = 0;
  for (Index j = 0; j < curves.values.cols(); ++j) {
    for (Index a = 0; a < steps; ++a) up += curves.values(a + 1, j) >= curves.values(a, j) ? 1 : 0;
  }
  return static_cast<double>(up) / static_cast<double>(steps * curves.values.cols());
}

namespace {

struct KMeansFit {
  std::vector<int> labels;
  double inertia = std::numeric_limits<double>::infinity();
};

KMeansFit kmeans(const Eigen::MatrixXd& x, int k, Rng& rng, int max_iterations) {
  const Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());

  // k-means++ seeding.
  centers.row(0) = x.row(rng.index(n));
  Eigen::VectorXd dist(n);
  for (Index i = 0; i < n; ++i) dist(i) = (x.row(i) - centers.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist.sum();
    Index pick = rng.index(n);
    if (total > 0.0) {
      double u = rng.uniform(0.0, total);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= dist(pick);
        if (u < 0.0) break;
      }
    }
    centers.row(c) = x.row(pick);
    for (Index i = 0; i < n; ++i) dist(i) = std::min(dist(i), (x.row(i) - centers.row(c)).squaredNorm());
  }

  KMeansFit fit;
  fit.labels.assign(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < max_iterations; ++iter) {
    bool changed = false;
    for (Index i = 0; i < n; ++i) {
      Index best = 0;
      (centers.rowwise() - x.row(i)).rowwise().squaredNorm().minCoeff(&best);
      if (fit.labels[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
        fit.labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, x.cols());
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Index i = 0; i < n; ++i) {
      sums.row(fit.labels[static_cast<std::size_t>(i)]) += x.row(i);
      counts(fit.labels[static_cast<std::size_t>(i)]) += 1.0;
    }
    for (int c = 0; c < k; ++c) {
      if (counts(c) > 0.0) {
        centers.row(c) = sums.row(c) / counts(c);
        continue;
      }
      // Empty cluster: move it to the point farthest from its center.
      Index far = 0;
      Eigen::VectorXd d(n);
      for (Index i = 0; i < n; ++i) d(i) = (x.row(i) - centers.row(fit.labels[static_cast<std::size_t>(i)])).squaredNorm();
      d.maxCoeff(&far);
      centers.row(c) = x.row(far);
    }
  }

  fit.inertia = 0.0;
  for (Index i = 0; i < n; ++i) {
    fit.inertia += (x.row(i) - centers.row(fit.labels[static_cast<std::size_t>(i)])).squaredNorm();
  }
  return fit;
}

std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> renumber;
  std::vector<int> out;
  out.reserve(labels.size());
  for (int l : labels) {
    const auto it = renumber.emplace(l, static_cast<int>(renumber.size())).first;
    out.push_back(it->second);
  }
  return out;
}

}  // namespace

ClusterAssignment spectral_cluster(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                                   std::vector<std::string> ids, const SpectralOptions& options) {
  const Index n = features.rows();
  if (k < 2) throw ArgumentError("spectral_cluster: k must be at least 2");
  if (n < k) throw ArgumentError("spectral_cluster: fewer rows than clusters");
  if (!ids.empty() && static_cast<Index>(ids.size()) != n) throw ArgumentError("spectral_cluster: id count mismatch");
  if (!features.allFinite()) throw DegenerateInputError("spectral_cluster: non-finite features");

  const Eigen::VectorXd norms = features.rowwise().norm();
  for (Index i = 0; i < n; ++i) {
    if (norms(i) == 0.0) throw DegenerateInputError("spectral_cluster: row " + std::to_string(i) + " is zero");
  }
  bool identical = true;
  for (Index i = 1; i < n && identical; ++i) identical = features.row(i) == features.row(0);
  if (identical) throw DegenerateInputError("spectral_cluster: all rows are identical");

  const Eigen::MatrixXd unit = norms.cwiseInverse().asDiagonal() * features;
  Eigen::MatrixXd affinity = (unit * unit.transpose()).cwiseMax(0.0);
  affinity.diagonal().setZero();

  const Eigen::VectorXd degree = affinity.rowwise().sum();
  Eigen::VectorXd inv_sqrt(n);
  for (Index i = 0; i < n; ++i) inv_sqrt(i) = degree(i) > 0.0 ? 1.0 / std::sqrt(degree(i)) : 0.0;
  const Eigen::MatrixXd laplacian = Eigen::MatrixXd::Identity(n, n) -
                                    inv_sqrt.asDiagonal() * affinity * inv_sqrt.asDiagonal();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(laplacian);
  if (eig.info() != Eigen::Success) throw DegenerateInputError("spectral_cluster: eigen solver failed");
  Eigen::MatrixXd embed = eig.eigenvectors().leftCols(k);
  for (Index i = 0; i < n; ++i) {
    const double len = embed.row(i).norm();
    if (len > 0.0) embed.row(i) /= len;
  }

  KMeansFit best;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    auto fit = kmeans(embed, k, rng, options.max_iterations);
    if (fit.inertia < best.inertia - 1e-12) best = std::move(fit);
  }

  ClusterAssignment out;
  if (ids.empty()) {
    for (Index i = 0; i < n; ++i) ids.push_back(std::to_string(i));
  }
  out.ids = std::move(ids);
  out.labels = canonical_labels(best.labels);
  out.num_clusters = k;
  out.affinity = "cosine";
  return out;
}

ClusterAssignment student_clusters(const ModelParams& params, const std::vector<std::string>& student_ids,
                                   int k, std::uint64_t seed) {
  return spectral_cluster(params.S, k, seed, student_ids);
}

ClusterAssignment material_clusters(const ModelParams& params, const std::vector<ViewSpec>& specs,
                                    std::span<const int> views, int k, std::uint64_t seed) {
  if (views.empty()) throw ArgumentError("material_clusters: no views selected");
  Index total = 0;
  for (int r : views) {
    if (r < 0 || r >= params.num_views()) throw ArgumentError("material_clusters: view out of range");
    total += params.Q[static_cast<std::size_t>(r)].cols();
  }
  Eigen::MatrixXd features(total, params.num_concepts());
  std::vector<std::string> ids;
  Index row = 0;
  for (int r : views) {
    const auto& Q = params.Q[static_cast<std::size_t>(r)];
    features.middleRows(row, Q.cols()) = Q.transpose();
    row += Q.cols();
    for (Index p = 0; p < Q.cols(); ++p) {
      const bool named = static_cast<std::size_t>(r) < specs.size() &&
                         static_cast<std::size_t>(p) < specs[static_cast<std::size_t>(r)].material_ids.size();
      ids.push_back(named ? specs[static_cast<std::size_t>(r)].name + "/" +
                                specs[static_cast<std::size_t>(r)].material_ids[static_cast<std::size_t>(p)]
                          : std::to_string(r) + "/" + std::to_string(p));
    }
  }
  if (k == total) {
    ClusterAssignment out;
    out.ids = std::move(ids);
    out.labels.resize(static_cast<std::size_t>(total));
    std::iota(out.labels.begin(), out.labels.end(), 0);
    out.num_clusters = k;
    out.affinity = "cosine";
    return out;
  }
  return spectral_cluster(features, k, seed, std::move(ids));
}

double bias_score_correlation(const ModelParams& params, const Dataset& ds, int view) {
  if (view < 0 || view >= params.num_views()) throw ArgumentError("bias_score_correlation: view out of range");
  const Index P = params.Q[static_cast<std::size_t>(view)].cols();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(P);
  for (const auto& rec : ds.records()) {
    if (rec.view != view) continue;
    sum(rec.material) += rec.value;
    count(rec.material) += 1.0;
  }
  std::vector<double> bias;
  std::vector<double> mean;
  for (Index p = 0; p < P; ++p) {
    if (count(p) == 0.0) continue;
    bias.push_back(params.b_p[static_cast<std::size_t>(view)](p));
    mean.push_back(sum(p) / count(p));
  }
  if (bias.size() < 3) throw ArgumentError("bias_score_correlation: need at least 3 observed materials");
  using Map = Eigen::Map<const Eigen::VectorXd>;
  const auto n = static_cast<Index>(bias.size());
  return spearman(Map(bias.data(), n), Map(mean.data(), n));
}

std::vector<ClusterScore> cluster_score_table(const ClusterAssignment& assignment, const Dataset& ds,
                                              int view) {
  if (static_cast<Index>(assignment.labels.size()) != ds.num_students()) {
    throw ArgumentError("cluster_score_table: assignment does not cover the dataset's students");
  }
  std::vector<ClusterScore> table(static_cast<std::size_t>(assignment.num_clusters));
  std::vector<double> sums(table.size(), 0.0);
  for (std::size_t c = 0; c < table.size(); ++c) table[c].cluster = static_cast<int>(c);
  for (int label : assignment.labels) ++table[static_cast<std::size_t>(label)].members;
  for (const auto& rec : ds.records()) {
    if (rec.view != view) continue;
    const auto c = static_cast<std::size_t>(assignment.labels[static_cast<std::size_t>(rec.student)]);
    sums[c] += rec.value;
    ++table[c].observations;
  }
  for (std::size_t c = 0; c < table.size(); ++c) {
    if (table[c].observations > 0) table[c].mean_score = sums[c] / static_cast<double>(table[c].observations);
  }
  return table;
}

std::string clusters_to_csv(const ClusterAssignment& assignment) {
  std::string out = "id,cluster\n";
  for (std::size_t i = 0; i < assignment.ids.size(); ++i) {
    out += assignment.ids[i] + "," + std::to_string(assignment.labels[i]) + "\n";
  }
  return out;
}

std::string cluster_scores_to_csv(const std::vector<ClusterScore>& table) {
  std::string out = "cluster,members,observations,mean_score\n";
  for (const auto& row : table) {
    out += std::to_string(row.cluster) + "," + std::to_string(row.members) + "," +
           std::to_string(row.observations) + "," + format_double(row.mean_score) + "\n";
  }
  return out;
}

}  // namespace mvkm
