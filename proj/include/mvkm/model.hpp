#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"

namespace mvkm {

/// Training and model-shape hyperparameters.
struct HyperParams {
  Index latent_dim = 3;     ///< K, student latent features
  Index num_concepts = 3;   ///< C
  double omega = 0.2;       ///< weight of the learning/forgetting penalty
  std::vector<double> gamma{1.0, 0.1};  ///< per-view reconstruction weight
  double eta = 0.1;         ///< SGD step size
  int markov_step = 1;      ///< m, predecessors compared by the penalty
  double lambda_t = 0.01;
  double lambda_s = 0.001;
  int epochs = 100;
  std::uint64_t seed = 42;

  int batch_size = 1;
  bool constrain_s = true;
  bool shared_attempt_bias = false;
  double early_stop_tol = 1e-5;
  /// 0 disables early stopping.
  int early_stop_window = 5;
  int fold_in_epochs = 100;

  /// gamma[view], or 1 for views beyond the configured list.
  double gamma_for(int view) const;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

/// All learned factors.
///
/// The K x C x A dynamic knowledge tensor is stored as one K x C slice per
/// attempt. Q holds one C x P matrix per view whose columns are concept
/// mixtures of the materials.
struct ModelParams {
  Eigen::MatrixXd S;                   // M x K
  std::vector<Eigen::MatrixXd> T;      // A slices of K x C
  std::vector<Eigen::MatrixXd> Q;      // per view, C x P
  Eigen::VectorXd b_s;                 // M
  std::vector<Eigen::VectorXd> b_p;    // per view, P
  std::vector<Eigen::VectorXd> b_a;    // per attempt-bias slot, A
  double mu = 0.0;
  std::vector<bool> view_graded;
  bool shared_attempt_bias = false;

  Index num_students() const { return S.rows(); }
  Index latent_dim() const { return S.cols(); }
  Index num_concepts() const { return Q.empty() ? (T.empty() ? 0 : T.front().cols()) : Q.front().rows(); }
  Index num_attempts() const { return static_cast<Index>(T.size()); }
  int num_views() const { return static_cast<int>(Q.size()); }
  Index num_materials(int view) const { return Q[static_cast<std::size_t>(view)].cols(); }

  /// Index into b_a used by `view`; 0 for every view when tied.
  int attempt_bias_slot(int view) const { return shared_attempt_bias ? 0 : view; }
  double attempt_bias(int view, Index attempt) const {
    return b_a[static_cast<std::size_t>(attempt_bias_slot(view))](attempt);
  }
};

/// Exact element-wise equality of every block.
bool identical(const ModelParams& a, const ModelParams& b);

/// s_s . T_a . q_p
double trilinear(const ModelParams& params, Index student, Index attempt, Index material, int view);

/// Affine form fed to the link: trilinear + b_s + b_p + b_a (+ mu on
/// non-graded views).
double affine_form(const ModelParams& params, Index student, Index attempt, Index material,
                   int view);

/// Raw graded prediction, unclipped.
double predict_graded(const ModelParams& params, Index student, Index attempt, Index material,
                      int view);
/// Graded prediction clipped to [0, 1] for reporting.
double predict_graded_clipped(const ModelParams& params, Index student, Index attempt,
                              Index material, int view);
/// sigmoid(affine + mu), always in (0, 1).
double predict_nongraded(const ModelParams& params, Index student, Index attempt, Index material,
                         int view);

/// Dispatches on the view's link: identity for graded, sigmoid otherwise.
double predict(const ModelParams& params, const InteractionRecord& rec);

/// Derived M x C x A knowledge levels K = S.T, one M x C slice per attempt.
class KnowledgeTensor {
public:
  KnowledgeTensor() = default;
  explicit KnowledgeTensor(std::vector<Eigen::MatrixXd> slices) : slices_(std::move(slices)) {}

  double operator()(Index student, Index concept_index, Index attempt) const {
    return slices_[static_cast<std::size_t>(attempt)](student, concept_index);
  }
  const Eigen::MatrixXd& slice(Index attempt) const { return slices_[static_cast<std::size_t>(attempt)]; }
  Index num_students() const { return slices_.empty() ? 0 : slices_.front().rows(); }
  Index num_concepts() const { return slices_.empty() ? 0 : slices_.front().cols(); }
  Index num_attempts() const { return static_cast<Index>(slices_.size()); }

private:
  std::vector<Eigen::MatrixXd> slices_;
};

KnowledgeTensor knowledge(const ModelParams& params);

/// Seeded initialization: S rows and Q columns are normalized positive
/// uniforms, T entries uniform on [0, 0.1], biases and mu zero.
ModelParams init_params(const HyperParams& hp, const Dataset& ds);

/// Zero-filled parameters with the same shape as `like`.
ModelParams zeros_like(const ModelParams& like);

struct ParamCheck {
  bool ok = true;
  std::string message;
  explicit operator bool() const { return ok; }
};

/// Checks simplex feasibility of Q columns (and S rows when `check_s`) and
/// finiteness of every entry.
ParamCheck validate_params(const ModelParams& params, bool check_s = true, double tol = 1e-6);

/// Flattened view of every parameter in a fixed block order:
/// S, T, Q, b_s, b_p, b_a, mu. Used for finite differences and checkpoints.
Eigen::VectorXd flatten(const ModelParams& params);
void unflatten(const Eigen::VectorXd& flat, ModelParams& params);

/// Appends default rows (uniform simplex S row, zero bias) so that `params`
/// covers `num_students` students.
void ensure_students(ModelParams& params, Index num_students);

struct Checkpoint {
  ModelParams params;
  HyperParams hyper;
  std::vector<std::string> student_ids;
  std::vector<ViewSpec> views;
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mvkm
