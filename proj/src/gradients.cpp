#include <set>

#include "mvkm/math.hpp"
#include "mvkm/train.hpp"

namespace mvkm {

namespace {

template <typename Map, typename Zero>
auto& slot(Map& map, Index key, const Zero& zero) {
  auto it = map.find(key);
  if (it == map.end()) it = map.emplace(key, zero).first;
  return it->second;
}

}  // namespace

Gradients gradients(const ModelParams& params, std::span<const InteractionRecord> batch,
                    const HyperParams& hp, ParamBlock blocks) {
  const Index K = params.latent_dim();
  const Index C = params.num_concepts();
  const Eigen::VectorXd zero_k = Eigen::VectorXd::Zero(K);
  const Eigen::VectorXd zero_c = Eigen::VectorXd::Zero(C);
  const Eigen::MatrixXd zero_kc = Eigen::MatrixXd::Zero(K, C);

  Gradients g;
  g.q.resize(params.Q.size());
  g.b_p.resize(params.b_p.size());
  g.b_a.resize(params.b_a.size());

  const bool want_s = has(blocks, ParamBlock::s);
  const bool want_t = has(blocks, ParamBlock::t);
  const bool want_q = has(blocks, ParamBlock::q);

  std::set<Index> reg_s;
  std::set<Index> reg_t;

  for (const auto& rec : batch) {
    const auto r = static_cast<std::size_t>(rec.view);
    const auto& Ta = params.T[static_cast<std::size_t>(rec.attempt)];
    const Eigen::VectorXd q = params.Q[r].col(rec.material);
    const Eigen::VectorXd s = params.S.row(rec.student).transpose();
    const Eigen::VectorXd Taq = Ta * q;

    // Reconstruction: d/du of gamma * (link(u) - x)^2.
    const bool graded = params.view_graded[r];
    double u = s.dot(Taq) + params.b_s(rec.student) + params.b_p[r](rec.material) +
               params.attempt_bias(rec.view, rec.attempt);
    double du;
    if (graded) {
      du = 2.0 * hp.gamma_for(rec.view) * (u - rec.value);
    } else {
      u += params.mu;
      const double p = sigmoid(u);
      du = 2.0 * hp.gamma_for(rec.view) * (p - rec.value) * p * (1.0 - p);
    }

    if (want_s) slot(g.s, rec.student, zero_k) += du * Taq;
    if (want_t) slot(g.t, rec.attempt, zero_kc) += du * s * q.transpose();
    if (want_q) slot(g.q[r], rec.material, zero_c) += du * Ta.transpose() * s;
    if (has(blocks, ParamBlock::b_s)) g.b_s[rec.student] += du;
    if (has(blocks, ParamBlock::b_p)) g.b_p[r][rec.material] += du;
    if (has(blocks, ParamBlock::b_a)) {
      g.b_a[static_cast<std::size_t>(params.attempt_bias_slot(rec.view))][rec.attempt] += du;
    }
    if (!graded && has(blocks, ParamBlock::mu)) g.mu += du;

    // Learning/forgetting penalty: -omega * log sigma(s.(T_a - T_j).q).
    if (hp.omega != 0.0 && (want_s || want_t || want_q)) {
      const Index first = std::max<Index>(0, rec.attempt - hp.markov_step);
      for (Index j = first; j < rec.attempt; ++j) {
        const Eigen::MatrixXd diff = Ta - params.T[static_cast<std::size_t>(j)];
        const Eigen::VectorXd diff_q = diff * q;
        const double h = -hp.omega * sigmoid(-s.dot(diff_q));
        if (want_s) slot(g.s, rec.student, zero_k) += h * diff_q;
        if (want_t) {
          const Eigen::MatrixXd outer = h * s * q.transpose();
          slot(g.t, rec.attempt, zero_kc) += outer;
          slot(g.t, j, zero_kc) -= outer;
        }
        if (want_q) slot(g.q[r], rec.material, zero_c) += h * diff.transpose() * s;
      }
    }

    reg_s.insert(rec.student);
    reg_t.insert(rec.attempt);
  }

  if (want_s && hp.lambda_s != 0.0) {
    for (Index s : reg_s) {
      slot(g.s, s, zero_k) += 2.0 * hp.lambda_s * params.S.row(s).transpose();
    }
  }
  if (want_t && hp.lambda_t != 0.0) {
    for (Index a : reg_t) {
      slot(g.t, a, zero_kc) += 2.0 * hp.lambda_t * params.T[static_cast<std::size_t>(a)];
    }
  }
  return g;
}

ModelParams Gradients::to_dense(const ModelParams& shape) const {
  ModelParams d = zeros_like(shape);
  for (const auto& [i, v] : s) d.S.row(i) = v.transpose();
  for (const auto& [a, m] : t) d.T[static_cast<std::size_t>(a)] = m;
  for (std::size_t r = 0; r < q.size(); ++r) {
    for (const auto& [p, v] : q[r]) d.Q[r].col(p) = v;
  }
  for (const auto& [i, v] : b_s) d.b_s(i) = v;
  for (std::size_t r = 0; r < b_p.size(); ++r) {
    for (const auto& [p, v] : b_p[r]) d.b_p[r](p) = v;
  }
  for (std::size_t k = 0; k < b_a.size(); ++k) {
    for (const auto& [a, v] : b_a[k]) d.b_a[k](a) = v;
  }
  d.mu = mu;
  return d;
}

ModelParams objective_gradient(const ModelParams& params, std::span<const InteractionRecord> records,
                               const HyperParams& hp) {
  HyperParams data_only = hp;
  data_only.lambda_t = 0.0;
  data_only.lambda_s = 0.0;
  ModelParams dense = gradients(params, records, data_only).to_dense(params);
  for (std::size_t a = 0; a < params.T.size(); ++a) dense.T[a] += 2.0 * hp.lambda_t * params.T[a];
  dense.S += 2.0 * hp.lambda_s * params.S;
  return dense;
}

void apply_step(ModelParams& params, const Gradients& grad, double step, bool constrain_s) {
  for (const auto& [s, v] : grad.s) {
    params.S.row(s) -= step * v.transpose();
    if (constrain_s) params.S.row(s) = project_simplex(params.S.row(s)).transpose();
  }
  for (const auto& [a, m] : grad.t) params.T[static_cast<std::size_t>(a)] -= step * m;
  for (std::size_t r = 0; r < grad.q.size(); ++r) {
    for (const auto& [p, v] : grad.q[r]) {
      auto col = params.Q[r].col(p);
      col -= step * v;
      col = project_simplex(col);
    }
  }
  for (const auto& [s, v] : grad.b_s) params.b_s(s) -= step * v;
  for (std::size_t r = 0; r < grad.b_p.size(); ++r) {
    for (const auto& [p, v] : grad.b_p[r]) params.b_p[r](p) -= step * v;
  }
  for (std::size_t k = 0; k < grad.b_a.size(); ++k) {
    for (const auto& [a, v] : grad.b_a[k]) params.b_a[k](a) -= step * v;
  }
  params.mu -= step * grad.mu;
}

}  // namespace mvkm
