#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/model.hpp"

namespace mvkm {

/// Objective value split into its parts; total = l1 - omega * l2.
struct ObjectiveBreakdown {
  double l1 = 0.0;              ///< weighted reconstruction + regularizers
  double l2 = 0.0;              ///< sum of log-sigmoid learning terms
  double total = 0.0;
  double reconstruction = 0.0;  ///< weighted squared error part of l1
  double regularization = 0.0;  ///< lambda_t / lambda_s part of l1
  std::size_t penalty_terms = 0;
};

/// Full objective over `records`, regularizing every T slice and S row.
/// The penalty is skipped entirely (l2 = 0, no terms) when omega == 0.
ObjectiveBreakdown objective(const ModelParams& params, std::span<const InteractionRecord> records,
                             const HyperParams& hp);
ObjectiveBreakdown objective(const ModelParams& params, const Dataset& ds, const HyperParams& hp);

/// Which parameter blocks a gradient evaluation fills.
enum class ParamBlock : unsigned {
  none = 0,
  s = 1u << 0,
  t = 1u << 1,
  q = 1u << 2,
  b_s = 1u << 3,
  b_p = 1u << 4,
  b_a = 1u << 5,
  mu = 1u << 6,
  all = (1u << 7) - 1,
  student = s | b_s,
};

constexpr ParamBlock operator|(ParamBlock a, ParamBlock b) {
  return static_cast<ParamBlock>(static_cast<unsigned>(a) | static_cast<unsigned>(b));
}
constexpr bool has(ParamBlock set, ParamBlock bit) {
  return (static_cast<unsigned>(set) & static_cast<unsigned>(bit)) != 0;
}

/// Sparse gradient: only blocks touched by the batch are present.
struct Gradients {
  std::map<Index, Eigen::VectorXd> s;                 // K per student
  std::map<Index, Eigen::MatrixXd> t;                 // K x C per attempt
  std::vector<std::map<Index, Eigen::VectorXd>> q;    // per view, C per material
  std::map<Index, double> b_s;
  std::vector<std::map<Index, double>> b_p;           // per view
  std::vector<std::map<Index, double>> b_a;           // per attempt-bias slot
  double mu = 0.0;

  /// Dense gradient laid out like `shape`.
  ModelParams to_dense(const ModelParams& shape) const;
};

/// Analytic gradient of the batch loss
///   sum_batch [ gamma_r (xhat - x)^2 - omega * sum_j log sigma(d_j) ]
///   + lambda_t |T_a|^2 + lambda_s |s_s|^2 for each distinct T_a, s_s touched
/// where d_j = s.T_a.q - s.T_j.q over the markov_step attempts j preceding a.
Gradients gradients(const ModelParams& params, std::span<const InteractionRecord> batch,
                    const HyperParams& hp, ParamBlock blocks = ParamBlock::all);

/// Gradient of the full objective: every T slice and S row regularized.
ModelParams objective_gradient(const ModelParams& params, std::span<const InteractionRecord> records,
                               const HyperParams& hp);

/// params -= step * grad on the touched blocks, then projects touched Q
/// columns (and S rows when `constrain_s`) back onto the simplex.
void apply_step(ModelParams& params, const Gradients& grad, double step, bool constrain_s);

enum class Ablation { full, base, no_penalty };

Ablation ablation_from_string(const std::string& name);
std::string to_string(Ablation ablation);

/// Records a variant trains on: `base` keeps only the primary graded view.
std::vector<InteractionRecord> training_records(const Dataset& ds, Ablation ablation);

/// Hyperparameters a variant runs with: `no_penalty` forces omega = 0.
HyperParams effective_hyper(const HyperParams& hp, Ablation ablation);

struct FitResult {
  ModelParams params;
  /// Entry 0 is the objective at initialization, entry e after epoch e.
  std::vector<ObjectiveBreakdown> history;
  int epochs_run = 0;
};

using EpochCallback = std::function<void(int epoch, const ModelParams&)>;

/// Pure SGD over shuffled observed records with simplex projection after
/// every update. Stops early once the relative objective improvement over
/// `early_stop_window` epochs drops below `early_stop_tol`.
FitResult fit(const Dataset& ds, const HyperParams& hp, Ablation ablation = Ablation::full,
              const EpochCallback& on_epoch = {});

struct FoldInResult {
  ModelParams params;
  std::vector<Index> cold_start;  ///< listed students with no prefix records
};

/// Estimates s_s and b_s for `students` from their `prefix` records with
/// every global factor frozen. Students without records are reset to the
/// uniform simplex row with zero bias, or rejected when `strict`.
FoldInResult fold_in(const ModelParams& params, std::span<const Index> students,
                     std::span<const InteractionRecord> prefix, const HyperParams& hp,
                     bool strict = false);

/// One SGD step on a single record touching only s_s and b_s.
void student_step(ModelParams& params, const InteractionRecord& rec, const HyperParams& hp);

}  // namespace mvkm
