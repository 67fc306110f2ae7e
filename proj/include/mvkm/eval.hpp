#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/model.hpp"
#include "mvkm/train.hpp"

namespace mvkm {

struct ErrorMetrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

template <typename DerivedP, typename DerivedA>
ErrorMetrics metrics(const Eigen::MatrixBase<DerivedP>& pred, const Eigen::MatrixBase<DerivedA>& actual) {
  if (pred.size() != actual.size()) throw ArgumentError("metrics: length mismatch");
  if (pred.size() == 0) throw ArgumentError("metrics: empty input");
  const auto diff = (pred.derived().array() - actual.derived().array()).eval();
  const auto n = static_cast<double>(pred.size());
  return {std::sqrt(diff.square().sum() / n), diff.abs().sum() / n,
          static_cast<std::size_t>(pred.size())};
}

ErrorMetrics metrics(std::span<const double> pred, std::span<const double> actual);

/// Predicts the mean graded training score for every query.
class AverageBaseline {
public:
  explicit AverageBaseline(double value) : value_(value) {}
  double predict() const noexcept { return value_; }
  double value() const noexcept { return value_; }

private:
  double value_;
};

/// Mean of `train` values in `graded_view`; throws when there are none.
AverageBaseline avg_baseline(std::span<const InteractionRecord> train, int graded_view);

enum class Method { mvkm, mvkm_base, mvkm_no_penalty, avg };

/// Table labels: MVKM, MVKM-Base, MVKM-W/O-P, AVG.
std::string method_label(Method method);
/// Accepts full, base, no-penalty, avg.
Method method_from_string(const std::string& name);
std::optional<Ablation> ablation_of(Method method);

/// One step of the online walk, for auditing access order.
struct AccessEvent {
  enum class Kind { predict, reveal };
  Kind kind;
  int fold;
  Index student;
  Index attempt;
};

struct EvalOptions {
  int folds = 5;
  std::uint64_t seed = 42;
  double prefix_fraction = 0.5;
  /// Folds run concurrently on up to `jobs` threads.
  int jobs = 1;
  /// Defaults to the lowest-id graded view.
  std::optional<int> graded_view;
  /// When set, receives every predict/reveal event in fold order.
  std::vector<AccessEvent>* access_log = nullptr;
};

struct AttemptError {
  Index attempt = 0;
  std::size_t count = 0;
  double rmse = 0.0;
  double mae = 0.0;
};

struct FoldResult {
  int fold = 0;
  ErrorMetrics metrics;
  std::size_t train_students = 0;
  std::size_t test_students = 0;
};

struct EvalReport {
  std::string method;
  HyperParams hyper;
  std::vector<FoldResult> folds;
  double rmse_mean = 0.0;
  double rmse_var = 0.0;  ///< population variance over folds
  double mae_mean = 0.0;
  double mae_var = 0.0;
  std::vector<AttemptError> per_attempt;
};

/// Student-stratified cross-validation with online next-attempt prediction.
///
/// Per fold: train on the train students' records, fold in each test
/// student from the prefix of their graded sequence, then walk the suffix
/// in attempt order. Each graded record is predicted before it is revealed;
/// revealed records update only that student's s_s and b_s.
EvalReport evaluate_online(const Dataset& ds, const HyperParams& hp, Method method,
                           const EvalOptions& options);

/// Runs the online protocol for one explicit train/test split.
struct SplitOutcome {
  std::vector<double> predicted;
  std::vector<double> actual;
  std::vector<Index> attempts;
};
SplitOutcome evaluate_split(const Dataset& ds, const HyperParams& hp, Method method,
                            const StudentSplit& split, int graded_view, double prefix_fraction,
                            int fold = 0, std::vector<AccessEvent>* access_log = nullptr);

/// Cartesian grid over the tuned hyperparameters; empty lists keep the
/// value from `base`.
struct HyperGrid {
  HyperParams base;
  std::vector<Index> latent_dim;
  std::vector<Index> num_concepts;
  std::vector<double> omega;
  std::vector<int> markov_step;
  std::vector<std::vector<double>> gamma;
  std::vector<double> eta;
  std::vector<double> lambda_t;
  std::vector<double> lambda_s;

  std::vector<HyperParams> expand() const;
};

struct GridRow {
  HyperParams hyper;
  ErrorMetrics validation;
};

struct GridResult {
  HyperParams best;
  std::size_t best_index = 0;
  std::vector<GridRow> table;
};

/// Evaluates every grid point with the online protocol on a held-out
/// validation group of 1/folds of the students; lowest RMSE wins (first on
/// ties).
GridResult grid_search(const Dataset& ds, const HyperGrid& grid, const EvalOptions& options);

}  // namespace mvkm
