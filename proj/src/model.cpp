#include "mvkm/model.hpp"

#include <algorithm>
#include <cmath>

#include "mvkm/errors.hpp"
#include "mvkm/math.hpp"
#include "mvkm/rng.hpp"

namespace mvkm {

double HyperParams::gamma_for(int view) const {
  return view >= 0 && static_cast<std::size_t>(view) < gamma.size()
             ? gamma[static_cast<std::size_t>(view)]
             : 1.0;
}

void HyperParams::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(what);
  };
  require(latent_dim >= 1, "K (latent_dim) must be >= 1");
  require(num_concepts >= 1, "C (num_concepts) must be >= 1");
  require(markov_step >= 1, "m (markov_step) must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(omega >= 0.0 && std::isfinite(omega), "omega must be finite and >= 0");
  require(eta >= 0.0 && std::isfinite(eta), "eta must be finite and >= 0");
  require(lambda_t >= 0.0 && lambda_s >= 0.0, "lambda_t and lambda_s must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(early_stop_window >= 0, "early_stop_window must be >= 0");
  require(fold_in_epochs >= 1, "fold_in_epochs must be >= 1");
  for (double g : gamma) require(g >= 0.0 && std::isfinite(g), "gamma entries must be >= 0");
}

bool identical(const ModelParams& a, const ModelParams& b) {
  auto same_list = [](const auto& x, const auto& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols() || x[i] != y[i]) return false;
    }
    return true;
  };
  return a.S.rows() == b.S.rows() && a.S.cols() == b.S.cols() && a.S == b.S &&
         same_list(a.T, b.T) && same_list(a.Q, b.Q) && a.b_s.size() == b.b_s.size() &&
         a.b_s == b.b_s && same_list(a.b_p, b.b_p) && same_list(a.b_a, b.b_a) && a.mu == b.mu &&
         a.view_graded == b.view_graded && a.shared_attempt_bias == b.shared_attempt_bias;
}

namespace {

void check_indices(const ModelParams& params, Index s, Index a, Index p, int r) {
  if (r < 0 || r >= params.num_views()) throw ArgumentError("view index out of range");
  if (s < 0 || s >= params.num_students()) throw ArgumentError("student index out of range");
  if (a < 0 || a >= params.num_attempts()) throw ArgumentError("attempt index out of range");
  if (p < 0 || p >= params.num_materials(r)) throw ArgumentError("material index out of range");
}

}  // namespace

double trilinear(const ModelParams& params, Index s, Index a, Index p, int r) {
  check_indices(params, s, a, p, r);
  const auto& Ta = params.T[static_cast<std::size_t>(a)];
  const auto& Qr = params.Q[static_cast<std::size_t>(r)];
  return params.S.row(s).dot(Ta * Qr.col(p));
}

double affine_form(const ModelParams& params, Index s, Index a, Index p, int r) {
  double u = trilinear(params, s, a, p, r) + params.b_s(s) +
             params.b_p[static_cast<std::size_t>(r)](p) + params.attempt_bias(r, a);
  if (!params.view_graded[static_cast<std::size_t>(r)]) u += params.mu;
  return u;
}

double predict_graded(const ModelParams& params, Index s, Index a, Index p, int r) {
  check_indices(params, s, a, p, r);
  if (!params.view_graded[static_cast<std::size_t>(r)]) {
    throw ArgumentError("predict_graded called on a non-graded view");
  }
  return affine_form(params, s, a, p, r);
}

double predict_graded_clipped(const ModelParams& params, Index s, Index a, Index p, int r) {
  return std::clamp(predict_graded(params, s, a, p, r), 0.0, 1.0);
}

double predict_nongraded(const ModelParams& params, Index s, Index a, Index p, int r) {
  check_indices(params, s, a, p, r);
  // The graded affine form has no mu; add it explicitly for graded-binary use.
  double u = affine_form(params, s, a, p, r);
  if (params.view_graded[static_cast<std::size_t>(r)]) u += params.mu;
  return sigmoid(u);
}

double predict(const ModelParams& params, const InteractionRecord& rec) {
  return params.view_graded[static_cast<std::size_t>(rec.view)]
             ? predict_graded(params, rec.student, rec.attempt, rec.material, rec.view)
             : predict_nongraded(params, rec.student, rec.attempt, rec.material, rec.view);
}

KnowledgeTensor knowledge(const ModelParams& params) {
  std::vector<Eigen::MatrixXd> slices;
  slices.reserve(params.T.size());
  for (const auto& Ta : params.T) slices.emplace_back(params.S * Ta);
  return KnowledgeTensor(std::move(slices));
}

namespace {

Eigen::VectorXd random_simplex_point(Index n, Rng& rng) {
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.uniform(1e-3, 1.0);
  return v / v.sum();
}

}  // namespace

ModelParams init_params(const HyperParams& hp, const Dataset& ds) {
  hp.validate();
  Rng rng(hp.seed);
  const Index M = ds.num_students();
  const Index K = hp.latent_dim;
  const Index C = hp.num_concepts;
  const Index A = std::max<Index>(ds.max_attempts(), 1);

  ModelParams p;
  p.shared_attempt_bias = hp.shared_attempt_bias;
  p.S.resize(M, K);
  for (Index s = 0; s < M; ++s) p.S.row(s) = random_simplex_point(K, rng).transpose();
  p.T.resize(static_cast<std::size_t>(A));
  for (auto& Ta : p.T) {
    Ta.resize(K, C);
    for (Index k = 0; k < K; ++k) {
      for (Index c = 0; c < C; ++c) Ta(k, c) = rng.uniform(0.0, 0.1);
    }
  }
  for (const auto& v : ds.views()) {
    Eigen::MatrixXd Qr(C, v.num_materials);
    for (Index j = 0; j < v.num_materials; ++j) Qr.col(j) = random_simplex_point(C, rng);
    p.Q.push_back(std::move(Qr));
    p.b_p.push_back(Eigen::VectorXd::Zero(v.num_materials));
    p.view_graded.push_back(v.graded);
  }
  p.b_s = Eigen::VectorXd::Zero(M);
  const std::size_t slots = hp.shared_attempt_bias ? 1 : std::max<std::size_t>(ds.views().size(), 1);
  p.b_a.assign(slots, Eigen::VectorXd::Zero(A));
  p.mu = 0.0;
  return p;
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams z = like;
  z.S.setZero();
  for (auto& m : z.T) m.setZero();
  for (auto& m : z.Q) m.setZero();
  z.b_s.setZero();
  for (auto& v : z.b_p) v.setZero();
  for (auto& v : z.b_a) v.setZero();
  z.mu = 0.0;
  return z;
}

ParamCheck validate_params(const ModelParams& params, bool check_s, double tol) {
  auto fail = [](std::string msg) { return ParamCheck{false, std::move(msg)}; };
  if (!params.S.allFinite()) return fail("S has non-finite entries");
  for (std::size_t a = 0; a < params.T.size(); ++a) {
    if (!params.T[a].allFinite()) return fail("T slice " + std::to_string(a) + " non-finite");
  }
  if (!params.b_s.allFinite() || !std::isfinite(params.mu)) return fail("non-finite bias");
  for (const auto& v : params.b_p) {
    if (!v.allFinite()) return fail("non-finite material bias");
  }
  for (const auto& v : params.b_a) {
    if (!v.allFinite()) return fail("non-finite attempt bias");
  }
  for (std::size_t r = 0; r < params.Q.size(); ++r) {
    const auto& Qr = params.Q[r];
    for (Index p = 0; p < Qr.cols(); ++p) {
      if (!on_simplex(Qr.col(p), tol)) {
        return fail("Q[" + std::to_string(r) + "] column " + std::to_string(p) + " off simplex");
      }
    }
  }
  if (check_s) {
    for (Index s = 0; s < params.S.rows(); ++s) {
      if (!on_simplex(params.S.row(s), tol)) return fail("S row " + std::to_string(s) + " off simplex");
    }
  }
  return {};
}

Eigen::VectorXd flatten(const ModelParams& p) {
  Index n = p.S.size() + p.b_s.size() + 1;
  for (const auto& m : p.T) n += m.size();
  for (const auto& m : p.Q) n += m.size();
  for (const auto& v : p.b_p) n += v.size();
  for (const auto& v : p.b_a) n += v.size();

  Eigen::VectorXd flat(n);
  Index off = 0;
  auto put = [&](const auto& block) {
    for (Index i = 0; i < block.rows(); ++i) {
      for (Index j = 0; j < block.cols(); ++j) flat(off++) = block(i, j);
    }
  };
  put(p.S);
  for (const auto& m : p.T) put(m);
  for (const auto& m : p.Q) put(m);
  put(p.b_s);
  for (const auto& v : p.b_p) put(v);
  for (const auto& v : p.b_a) put(v);
  flat(off++) = p.mu;
  return flat;
}

void unflatten(const Eigen::VectorXd& flat, ModelParams& p) {
  if (flat.size() != flatten(p).size()) throw ArgumentError("flat parameter vector size mismatch");
  Index off = 0;
  auto take = [&](auto& block) {
    for (Index i = 0; i < block.rows(); ++i) {
      for (Index j = 0; j < block.cols(); ++j) block(i, j) = flat(off++);
    }
  };
  take(p.S);
  for (auto& m : p.T) take(m);
  for (auto& m : p.Q) take(m);
  take(p.b_s);
  for (auto& v : p.b_p) take(v);
  for (auto& v : p.b_a) take(v);
  p.mu = flat(off++);
}

void ensure_students(ModelParams& params, Index num_students) {
  const Index old = params.num_students();
  if (num_students <= old) return;
  const Index K = params.latent_dim();
  params.S.conservativeResize(num_students, K);
  params.S.bottomRows(num_students - old).setConstant(1.0 / static_cast<double>(K));
  params.b_s.conservativeResize(num_students);
  params.b_s.tail(num_students - old).setZero();
}

}  // namespace mvkm
