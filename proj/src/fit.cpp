#include <cmath>
#include <map>
#include <numeric>

#include "mvkm/errors.hpp"
#include "mvkm/math.hpp"
#include "mvkm/rng.hpp"
#include "mvkm/train.hpp"

namespace mvkm {

Ablation ablation_from_string(const std::string& name) {
  if (name == "full") return Ablation::full;
  if (name == "base") return Ablation::base;
  if (name == "no-penalty" || name == "no_penalty") return Ablation::no_penalty;
  throw ArgumentError("unknown ablation '" + name + "' (expected full, base or no-penalty)");
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::full: return "full";
    case Ablation::base: return "base";
    case Ablation::no_penalty: return "no-penalty";
  }
  return "full";
}

std::vector<InteractionRecord> training_records(const Dataset& ds, Ablation ablation) {
  const auto records = ds.records();
  if (ablation != Ablation::base) return {records.begin(), records.end()};
  const auto graded = ds.primary_graded_view();
  if (!graded) throw ArgumentError("base ablation needs a graded view");
  std::vector<InteractionRecord> out;
  for (const auto& rec : records) {
    if (rec.view == *graded) out.push_back(rec);
  }
  return out;
}

HyperParams effective_hyper(const HyperParams& hp, Ablation ablation) {
  HyperParams out = hp;
  if (ablation == Ablation::no_penalty) out.omega = 0.0;
  return out;
}

FitResult fit(const Dataset& ds, const HyperParams& hp_in, Ablation ablation,
              const EpochCallback& on_epoch) {
  const HyperParams hp = effective_hyper(hp_in, ablation);
  hp.validate();
  const auto records = training_records(ds, ablation);

  FitResult result;
  result.params = init_params(hp, ds);
  auto& params = result.params;

  result.history.push_back(objective(params, records, hp));
  if (records.empty()) return result;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(hp.seed, 0xF17));
  std::vector<InteractionRecord> batch;
  batch.reserve(static_cast<std::size_t>(hp.batch_size));

  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hp.batch_size)) {
      batch.clear();
      const auto stop = std::min(order.size(), start + static_cast<std::size_t>(hp.batch_size));
      for (std::size_t i = start; i < stop; ++i) batch.push_back(records[order[i]]);
      apply_step(params, gradients(params, batch, hp), hp.eta, hp.constrain_s);
    }

    const auto obj = objective(params, records, hp);
    if (!std::isfinite(obj.total)) throw TrainingError(epoch, "objective diverged to a non-finite value");
    result.history.push_back(obj);
    result.epochs_run = epoch;
    if (on_epoch) on_epoch(epoch, params);

    const auto window = static_cast<std::size_t>(hp.early_stop_window);
    if (window > 0 && result.history.size() > window) {
      const double before = result.history[result.history.size() - 1 - window].total;
      const double improvement = (before - obj.total) / std::max(std::abs(before), 1e-12);
      if (improvement < hp.early_stop_tol) break;
    }
  }
  return result;
}

void student_step(ModelParams& params, const InteractionRecord& rec, const HyperParams& hp) {
  const InteractionRecord batch[] = {rec};
  apply_step(params, gradients(params, batch, hp, ParamBlock::student), hp.eta,
             hp.constrain_s);
}

FoldInResult fold_in(const ModelParams& params, std::span<const Index> students,
                     std::span<const InteractionRecord> prefix, const HyperParams& hp,
                     bool strict) {
  hp.validate();
  std::map<Index, std::vector<InteractionRecord>> by_student;
  for (Index s : students) by_student[s];
  Index max_student = params.num_students() - 1;
  for (const auto& rec : prefix) {
    by_student[rec.student].push_back(rec);
    max_student = std::max(max_student, rec.student);
  }
  for (Index s : students) max_student = std::max(max_student, s);

  FoldInResult out{params, {}};
  auto& folded = out.params;
  ensure_students(folded, max_student + 1);
  const Index K = folded.latent_dim();

  for (auto& [s, recs] : by_student) {
    folded.S.row(s).setConstant(1.0 / static_cast<double>(K));
    folded.b_s(s) = 0.0;
    if (recs.empty()) {
      if (strict) throw ColdStartError("student index " + std::to_string(s) + " has no prefix records");
      out.cold_start.push_back(s);
      continue;
    }
    std::stable_sort(recs.begin(), recs.end(),
                     [](const auto& a, const auto& b) { return a.attempt < b.attempt; });
    for (int epoch = 0; epoch < hp.fold_in_epochs; ++epoch) {
      for (const auto& rec : recs) student_step(folded, rec, hp);
    }
  }
  return out;
}

}  // namespace mvkm
