#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "mvkm/analysis.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/math.hpp"
#include "support.hpp"

using namespace mvkm;
using mvkm::testing::tiny_instance;

namespace {

// Fraction of pairs on which two labelings agree about "same cluster".
double pair_agreement(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t agree = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      agree += (a[i] == a[j]) == (b[i] == b[j]);
      ++total;
    }
  }
  return static_cast<double>(agree) / static_cast<double>(total);
}

Eigen::MatrixXd two_groups(int per_group, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> jitter(0.0, 0.05);
  Eigen::MatrixXd x(2 * per_group, 3);
  for (int i = 0; i < 2 * per_group; ++i) {
    const bool first = i < per_group;
    x.row(i) << (first ? 1.0 : 0.0) + jitter(gen), (first ? 0.0 : 1.0) + jitter(gen), jitter(gen);
  }
  return x;
}

ModelParams simplex_params(std::uint64_t seed) {
  auto t = tiny_instance(seed, 6, 5, 3, 3);
  auto& p = t.params;
  for (Index s = 0; s < p.S.rows(); ++s) p.S.row(s) = project_simplex(p.S.row(s).transpose());
  for (auto& q : p.Q) {
    for (Index c = 0; c < q.cols(); ++c) q.col(c) /= q.col(c).sum();
  }
  return p;
}

}  // namespace

TEST(AverageRanks, TiesShareTheMeanRank) {
  const Eigen::Vector4d x(10.0, 20.0, 10.0, 5.0);
  const Eigen::VectorXd r = average_ranks(x);
  EXPECT_EQ(r, Eigen::Vector4d(2.5, 4.0, 2.5, 1.0));
}

TEST(Spearman, MonotoneAndReversed) {
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(8, 0.0, 7.0);
  const Eigen::VectorXd y = x.array().exp();
  EXPECT_NEAR(spearman(x, y), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, -y), -1.0, 1e-15);
}

TEST(Spearman, MatchesClosedFormWithoutTies) {
  const Eigen::VectorXd x = (Eigen::VectorXd(6) << 3, 1, 4, 1.5, 5, 9).finished();
  const Eigen::VectorXd y = (Eigen::VectorXd(6) << 2, 7, 1, 8, 2.5, 8.5).finished();
  const Eigen::VectorXd rx = average_ranks(x);
  const Eigen::VectorXd ry = average_ranks(y);
  const double d2 = (rx - ry).squaredNorm();
  EXPECT_NEAR(spearman(x, y), 1.0 - 6.0 * d2 / (6.0 * 35.0), 1e-12);
}

TEST(Spearman, HandlesTiesAndRejectsDegenerateInput) {
  const Eigen::Vector4d x(1.0, 2.0, 2.0, 3.0);
  const Eigen::Vector4d y(1.0, 3.0, 2.0, 4.0);
  // Pearson on ranks (1, 2.5, 2.5, 4) vs (1, 3, 2, 4).
  EXPECT_NEAR(spearman(x, y), 4.5 / std::sqrt(4.5 * 5.0), 1e-12);
  EXPECT_THROW(spearman(x, Eigen::Vector4d::Ones()), DegenerateInputError);
  EXPECT_THROW(spearman(Eigen::Vector2d(1, 2), Eigen::Vector3d(1, 2, 3)), ArgumentError);
  EXPECT_THROW(spearman(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)), ArgumentError);
}

TEST(SpectralCluster, SeparatesOrthogonalGroups) {
  const auto x = two_groups(10, 1);
  const auto c = spectral_cluster(x, 2, 42);
  std::vector<int> truth(20, 0);
  std::fill(truth.begin() + 10, truth.end(), 1);
  EXPECT_EQ(pair_agreement(c.labels, truth), 1.0);
  EXPECT_EQ(c.num_clusters, 2);
  EXPECT_EQ(c.labels.front(), 0);
  EXPECT_EQ(c.ids.front(), "0");
}

TEST(SpectralCluster, IsInvariantToRowScaleAndPermutation) {
  const auto x = two_groups(8, 2);
  const auto base = spectral_cluster(x, 2, 42);

  Eigen::MatrixXd scaled = x;
  for (Index i = 0; i < x.rows(); ++i) scaled.row(i) *= 0.5 + static_cast<double>(i);
  EXPECT_EQ(pair_agreement(spectral_cluster(scaled, 2, 42).labels, base.labels), 1.0);

  std::vector<Index> perm(static_cast<std::size_t>(x.rows()));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  Eigen::MatrixXd permuted(x.rows(), x.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) permuted.row(static_cast<Index>(i)) = x.row(perm[i]);
  const auto p = spectral_cluster(permuted, 2, 42);
  std::vector<int> unpermuted(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) unpermuted[static_cast<std::size_t>(perm[i])] = p.labels[i];
  EXPECT_EQ(pair_agreement(unpermuted, base.labels), 1.0);
}

TEST(SpectralCluster, IsSeededAndValidatesInput) {
  const auto x = two_groups(6, 4);
  EXPECT_EQ(spectral_cluster(x, 2, 9).labels, spectral_cluster(x, 2, 9).labels);
  EXPECT_THROW(spectral_cluster(x, 1, 9), ArgumentError);
  EXPECT_THROW(spectral_cluster(x, 13, 9), ArgumentError);
  EXPECT_THROW(spectral_cluster(Eigen::MatrixXd::Ones(5, 3), 2, 9), DegenerateInputError);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = NAN;
  EXPECT_THROW(spectral_cluster(bad, 2, 9), DegenerateInputError);
  EXPECT_THROW(spectral_cluster(x, 2, 9, {"only-one-id"}), ArgumentError);
}

TEST(SpectralCluster, AcceptsExpressions) {
  const auto x = two_groups(5, 5);
  EXPECT_EQ(spectral_cluster(x * 2.0, 2, 1).labels.size(), 10u);
}

TEST(KnowledgeCurves, MatchBruteForceAverage) {
  const auto p = simplex_params(1);
  const std::vector<Index> concepts{2, 0};
  const std::vector<Index> students{1, 3, 4};
  const auto curves = knowledge_curves(p, concepts, students);
  ASSERT_EQ(curves.values.rows(), p.num_attempts());
  for (Index a = 0; a < p.num_attempts(); ++a) {
    for (std::size_t j = 0; j < concepts.size(); ++j) {
      double sum = 0.0;
      for (Index s : students) {
        for (Index k = 0; k < p.latent_dim(); ++k) sum += p.S(s, k) * p.T[a](k, concepts[j]);
      }
      EXPECT_NEAR(curves.values(a, static_cast<Index>(j)), sum / 3.0, 1e-14);
    }
  }
  EXPECT_EQ(knowledge_curves(p).values.cols(), 3);
  EXPECT_THROW(knowledge_curves(p, concepts, std::vector<Index>{}), ArgumentError);
}

TEST(KnowledgeCurves, NondecreasingFractionCountsSteps) {
  CurveTable t{{0, 1}, Eigen::MatrixXd(4, 2)};
  t.values << 0.1, 0.5,
              0.2, 0.4,
              0.2, 0.3,
              0.1, 0.6;
  // Column 0: up, flat, down. Column 1: down, down, up.
  EXPECT_DOUBLE_EQ(nondecreasing_fraction(t), 3.0 / 6.0);
  EXPECT_EQ(curves_to_csv(t), "attempt,c0,c1\n0,0.1,0.5\n1,0.2,0.4\n2,0.2,0.3\n3,0.1,0.6\n");
}

TEST(Clusters, StudentAndMaterialIdsAndCsv) {
  const auto p = simplex_params(2);
  const std::vector<std::string> ids{"a", "b", "c", "d", "e", "f"};
  const auto s = student_clusters(p, ids, 2, 1);
  EXPECT_EQ(s.ids, ids);
  const std::string csv = clusters_to_csv(s);
  EXPECT_EQ(csv.rfind("id,cluster\na,0\n", 0), 0u);

  std::vector<ViewSpec> specs{{0, "quiz", true, 3, {"q0", "q1", "q2"}}, {1, "video", false, 4, {"v0", "v1", "v2", "v3"}}};
  const std::vector<int> views{1, 0};
  const auto m = material_clusters(p, specs, views, 7, 1);
  ASSERT_EQ(m.ids.size(), 7u);
  EXPECT_EQ(m.ids.front(), "video/v0");
  EXPECT_EQ(m.ids.back(), "quiz/q2");
  EXPECT_EQ(std::set<int>(m.labels.begin(), m.labels.end()).size(), 7u);
}

TEST(BiasCorrelation, RanksBiasAgainstMeanScore) {
  auto p = simplex_params(3);
  const std::vector<ViewSpec> views{{0, "quiz", true, 3, {}}, {1, "video", false, 4, {}}};
  const Dataset ds(views, {"a", "b"},
                   {{0, 0, 0, 0, 0.9}, {1, 0, 0, 0, 0.7}, {0, 1, 0, 1, 0.2}, {1, 1, 0, 2, 0.5}, {0, 2, 1, 0, 1.0}});
  p.b_p[0] << 3.0, -1.0, 0.5;
  EXPECT_NEAR(bias_score_correlation(p, ds, 0), 1.0, 1e-15);
  p.b_p[0] << -3.0, 1.0, 0.5;
  EXPECT_NEAR(bias_score_correlation(p, ds, 0), -1.0, 1e-15);
  EXPECT_THROW(bias_score_correlation(p, ds, 1), ArgumentError);
}

TEST(ClusterScores, AverageObservedScorePerCluster) {
  const std::vector<ViewSpec> views{{0, "quiz", true, 2, {}}};
  const Dataset ds(views, {"a", "b", "c"}, {{0, 0, 0, 0, 0.2}, {0, 1, 0, 1, 0.4}, {1, 0, 0, 0, 1.0}, {2, 0, 0, 1, 0.5}});
  ClusterAssignment c{{"a", "b", "c"}, {0, 1, 0}, 2, "cosine"};
  const auto table = cluster_score_table(c, ds, 0);
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table[0].members, 2u);
  EXPECT_EQ(table[0].observations, 3u);
  EXPECT_NEAR(table[0].mean_score, (0.2 + 0.4 + 0.5) / 3.0, 1e-15);
  EXPECT_NEAR(table[1].mean_score, 1.0, 1e-15);
  EXPECT_EQ(cluster_scores_to_csv(table).substr(0, 39), "cluster,members,observations,mean_score");
}
