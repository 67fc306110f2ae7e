#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/model.hpp"

namespace mvkm::testing {

/// Small random model with two views and a record set over it.
struct TinyInstance {
  ModelParams params;
  std::vector<InteractionRecord> records;
  HyperParams hp;
};

inline TinyInstance tiny_instance(std::uint64_t seed, Index M = 4, Index A = 5, Index K = 3, Index C = 3,
                                  bool second_view_graded = false) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 0.3);
  const std::vector<Index> P{3, 4};

  TinyInstance t;
  auto& p = t.params;
  p.S = Eigen::MatrixXd::NullaryExpr(M, K, [&] { return u(gen); });
  for (Index a = 0; a < A; ++a) p.T.push_back(Eigen::MatrixXd::NullaryExpr(K, C, [&] { return n(gen); }));
  for (Index r : P) {
    p.Q.push_back(Eigen::MatrixXd::NullaryExpr(C, r, [&] { return u(gen); }));
    p.b_p.push_back(Eigen::VectorXd::NullaryExpr(r, [&] { return n(gen); }));
  }
  p.b_s = Eigen::VectorXd::NullaryExpr(M, [&] { return n(gen); });
  for (int slot = 0; slot < 2; ++slot) p.b_a.push_back(Eigen::VectorXd::NullaryExpr(A, [&] { return n(gen); }));
  p.mu = n(gen);
  p.view_graded = {true, second_view_graded};

  for (Index s = 0; s < M; ++s) {
    for (Index a = 0; a < A; ++a) {
      if (u(gen) < 0.2) continue;
      const int view = u(gen) < 0.5 ? 0 : 1;
      const Index material = static_cast<Index>(u(gen) * static_cast<double>(P[static_cast<std::size_t>(view)]));
      const double value = (view == 0 || second_view_graded) ? u(gen) : 1.0;
      t.records.push_back({s, a, view, material, value});
    }
  }

  t.hp.latent_dim = K;
  t.hp.num_concepts = C;
  t.hp.omega = 0.3;
  t.hp.markov_step = 2;
  t.hp.gamma = {1.0, 0.4};
  t.hp.lambda_t = 0.02;
  t.hp.lambda_s = 0.01;
  return t;
}

/// Per-test scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mvkm_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
  std::filesystem::path path_;
};

}  // namespace mvkm::testing
