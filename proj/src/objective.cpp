#include <cmath>

#include "mvkm/math.hpp"
#include "mvkm/train.hpp"

namespace mvkm {

ObjectiveBreakdown objective(const ModelParams& params, std::span<const InteractionRecord> records,
                             const HyperParams& hp) {
  ObjectiveBreakdown out;
  const bool with_penalty = hp.omega != 0.0;
  for (const auto& rec : records) {
    const auto& Ta = params.T[static_cast<std::size_t>(rec.attempt)];
    const auto q = params.Q[static_cast<std::size_t>(rec.view)].col(rec.material);
    const auto s = params.S.row(rec.student);

    const double residual = predict(params, rec) - rec.value;
    out.reconstruction += hp.gamma_for(rec.view) * residual * residual;

    if (!with_penalty) continue;
    const Eigen::VectorXd Taq = Ta * q;
    const Index first = std::max<Index>(0, rec.attempt - hp.markov_step);
    for (Index j = first; j < rec.attempt; ++j) {
      const double d = s.dot(Taq - params.T[static_cast<std::size_t>(j)] * q);
      out.l2 += log_sigmoid(d);
      ++out.penalty_terms;
    }
  }
  for (const auto& Ta : params.T) out.regularization += hp.lambda_t * Ta.squaredNorm();
  out.regularization += hp.lambda_s * params.S.squaredNorm();
  out.l1 = out.reconstruction + out.regularization;
  out.total = out.l1 - hp.omega * out.l2;
  return out;
}

ObjectiveBreakdown objective(const ModelParams& params, const Dataset& ds, const HyperParams& hp) {
  return objective(params, ds.records(), hp);
}

}  // namespace mvkm
