#include "mvkm/eval.hpp"

#include <algorithm>
#include <future>
#include <map>

namespace mvkm {

ErrorMetrics metrics(std::span<const double> pred, std::span<const double> actual) {
  using Map = Eigen::Map<const Eigen::VectorXd>;
  return metrics(Map(pred.data(), static_cast<Index>(pred.size())),
                 Map(actual.data(), static_cast<Index>(actual.size())));
}

AverageBaseline avg_baseline(std::span<const InteractionRecord> train, int graded_view) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& rec : train) {
    if (rec.view != graded_view) continue;
    sum += rec.value;
    ++n;
  }
  if (n == 0) throw ArgumentError("average baseline needs at least one graded training record");
  return AverageBaseline(sum / static_cast<double>(n));
}

std::string method_label(Method method) {
  switch (method) {
    case Method::mvkm: return "MVKM";
    case Method::mvkm_base: return "MVKM-Base";
    case Method::mvkm_no_penalty: return "MVKM-W/O-P";
    case Method::avg: return "AVG";
  }
  return "MVKM";
}

Method method_from_string(const std::string& name) {
  if (name == "avg" || name == "AVG") return Method::avg;
  switch (ablation_from_string(name)) {
    case Ablation::full: return Method::mvkm;
    case Ablation::base: return Method::mvkm_base;
    case Ablation::no_penalty: return Method::mvkm_no_penalty;
  }
  return Method::mvkm;
}

std::optional<Ablation> ablation_of(Method method) {
  switch (method) {
    case Method::mvkm: return Ablation::full;
    case Method::mvkm_base: return Ablation::base;
    case Method::mvkm_no_penalty: return Ablation::no_penalty;
    case Method::avg: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

/// Key of a held-out record: everything except its value.
struct RecordKey {
  Index student;
  Index attempt;
  int view;
  Index material;
};

/// Walks one student's suffix. The value of a record is reachable only
/// through reveal(), which logs the access.
class SuffixCursor {
public:
  SuffixCursor(std::vector<InteractionRecord> suffix, int fold, std::vector<AccessEvent>* log)
      : records_(std::move(suffix)), fold_(fold), log_(log) {}

  bool has_next() const { return next_ < records_.size(); }
  RecordKey peek() const {
    const auto& r = records_[next_];
    return {r.student, r.attempt, r.view, r.material};
  }
  void note_prediction() const {
    const auto& r = records_[next_];
    if (log_) log_->push_back({AccessEvent::Kind::predict, fold_, r.student, r.attempt});
  }
  InteractionRecord reveal() {
    const auto& r = records_[next_++];
    if (log_) log_->push_back({AccessEvent::Kind::reveal, fold_, r.student, r.attempt});
    return r;
  }

private:
  std::vector<InteractionRecord> records_;
  std::size_t next_ = 0;
  int fold_;
  std::vector<AccessEvent>* log_;
};

bool uses_view(Method method, int view, int graded_view) {
  return method != Method::mvkm_base || view == graded_view;
}

}  // namespace

SplitOutcome evaluate_split(const Dataset& ds, const HyperParams& hp_in, Method method,
                            const StudentSplit& split, int graded_view, double prefix_fraction,
                            int fold, std::vector<AccessEvent>* access_log) {
  std::vector<InteractionRecord> train;
  for (Index s : split.train) {
    const auto recs = ds.student_records(s);
    train.insert(train.end(), recs.begin(), recs.end());
  }
  const Dataset train_ds = ds.with_records(train);

  std::optional<AverageBaseline> avg;
  ModelParams params;
  HyperParams hp = hp_in;
  const auto ablation = ablation_of(method);
  if (ablation) {
    hp = effective_hyper(hp_in, *ablation);
    params = fit(train_ds, hp, *ablation).params;
  } else {
    avg = avg_baseline(train, graded_view);
  }

  // Prefix/suffix per test student; students without graded records are skipped.
  std::vector<Index> students;
  std::vector<InteractionRecord> prefix;
  std::vector<std::vector<InteractionRecord>> suffixes;
  for (Index s : split.test) {
    const auto recs = ds.student_records(s);
    const bool has_graded = std::any_of(recs.begin(), recs.end(),
                                        [&](const auto& r) { return r.view == graded_view; });
    if (!has_graded) continue;
    auto parts = split_prefix_suffix(ds, s, graded_view, prefix_fraction);
    students.push_back(s);
    for (const auto& rec : parts.prefix) {
      if (uses_view(method, rec.view, graded_view)) prefix.push_back(rec);
    }
    suffixes.push_back(std::move(parts.suffix));
  }

  if (ablation) params = fold_in(params, students, prefix, hp).params;

  SplitOutcome out;
  for (std::size_t i = 0; i < students.size(); ++i) {
    SuffixCursor cursor(std::move(suffixes[i]), fold, access_log);
    while (cursor.has_next()) {
      const RecordKey key = cursor.peek();
      if (key.view == graded_view) {
        const double pred =
            avg ? avg->predict()
                : predict_graded_clipped(params, key.student, key.attempt, key.material, key.view);
        cursor.note_prediction();
        const auto rec = cursor.reveal();
        out.predicted.push_back(pred);
        out.actual.push_back(rec.value);
        out.attempts.push_back(rec.attempt);
        if (ablation) student_step(params, rec, hp);
      } else {
        const auto rec = cursor.reveal();
        if (ablation && uses_view(method, rec.view, graded_view)) student_step(params, rec, hp);
      }
    }
  }
  return out;
}

EvalReport evaluate_online(const Dataset& ds, const HyperParams& hp, Method method,
                           const EvalOptions& options) {
  const auto graded_view = options.graded_view ? options.graded_view : ds.primary_graded_view();
  if (!graded_view) throw ArgumentError("online evaluation needs a graded view");
  const auto splits = split_student_stratified(ds, options.folds, options.seed);

  const auto nfolds = splits.size();
  std::vector<SplitOutcome> outcomes(nfolds);
  std::vector<std::vector<AccessEvent>> logs(nfolds);
  auto run_fold = [&](std::size_t f) {
    outcomes[f] = evaluate_split(ds, hp, method, splits[f], *graded_view, options.prefix_fraction,
                                 static_cast<int>(f), options.access_log ? &logs[f] : nullptr);
  };
  const auto jobs = static_cast<std::size_t>(std::max(1, options.jobs));
  for (std::size_t start = 0; start < nfolds; start += jobs) {
    std::vector<std::future<void>> running;
    for (std::size_t f = start; f < std::min(nfolds, start + jobs); ++f) {
      if (jobs == 1) {
        run_fold(f);
      } else {
        running.push_back(std::async(std::launch::async, run_fold, f));
      }
    }
    for (auto& fut : running) fut.get();
  }

  EvalReport report;
  report.method = method_label(method);
  report.hyper = hp;
  std::map<Index, std::pair<std::vector<double>, std::vector<double>>> by_attempt;
  for (std::size_t f = 0; f < nfolds; ++f) {
    const auto& o = outcomes[f];
    FoldResult fr;
    fr.fold = static_cast<int>(f);
    fr.train_students = splits[f].train.size();
    fr.test_students = splits[f].test.size();
    if (!o.predicted.empty()) fr.metrics = metrics(o.predicted, o.actual);
    report.folds.push_back(fr);
    for (std::size_t i = 0; i < o.predicted.size(); ++i) {
      auto& [p, a] = by_attempt[o.attempts[i]];
      p.push_back(o.predicted[i]);
      a.push_back(o.actual[i]);
    }
    if (options.access_log) {
      options.access_log->insert(options.access_log->end(), logs[f].begin(), logs[f].end());
    }
  }

  const auto n = static_cast<double>(report.folds.size());
  for (const auto& fr : report.folds) {
    report.rmse_mean += fr.metrics.rmse / n;
    report.mae_mean += fr.metrics.mae / n;
  }
  for (const auto& fr : report.folds) {
    report.rmse_var += (fr.metrics.rmse - report.rmse_mean) * (fr.metrics.rmse - report.rmse_mean) / n;
    report.mae_var += (fr.metrics.mae - report.mae_mean) * (fr.metrics.mae - report.mae_mean) / n;
  }
  for (const auto& [attempt, pa] : by_attempt) {
    const auto m = metrics(pa.first, pa.second);
    report.per_attempt.push_back({attempt, m.count, m.rmse, m.mae});
  }
  return report;
}

std::vector<HyperParams> HyperGrid::expand() const {
  std::vector<HyperParams> points{base};
  auto cross = [&points](const auto& values, auto assign) {
    if (values.empty()) return;
    std::vector<HyperParams> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        HyperParams q = p;
        assign(q, v);
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  };
  cross(latent_dim, [](HyperParams& h, Index v) { h.latent_dim = v; });
  cross(num_concepts, [](HyperParams& h, Index v) { h.num_concepts = v; });
  cross(omega, [](HyperParams& h, double v) { h.omega = v; });
  cross(markov_step, [](HyperParams& h, int v) { h.markov_step = v; });
  cross(gamma, [](HyperParams& h, const std::vector<double>& v) { h.gamma = v; });
  cross(eta, [](HyperParams& h, double v) { h.eta = v; });
  cross(lambda_t, [](HyperParams& h, double v) { h.lambda_t = v; });
  cross(lambda_s, [](HyperParams& h, double v) { h.lambda_s = v; });
  return points;
}

GridResult grid_search(const Dataset& ds, const HyperGrid& grid, const EvalOptions& options) {
  const auto points = grid.expand();
  const auto graded_view = options.graded_view ? options.graded_view : ds.primary_graded_view();
  if (!graded_view) throw ArgumentError("grid search needs a graded view");
  const auto validation = split_student_stratified(ds, options.folds, options.seed).front();

  GridResult result;
  result.table.resize(points.size());
  auto run_point = [&](std::size_t i) {
    const auto o = evaluate_split(ds, points[i], Method::mvkm, validation, *graded_view,
                                  options.prefix_fraction);
    result.table[i] = {points[i], o.predicted.empty() ? ErrorMetrics{} : metrics(o.predicted, o.actual)};
  };
  const auto jobs = static_cast<std::size_t>(std::max(1, options.jobs));
  for (std::size_t start = 0; start < points.size(); start += jobs) {
    std::vector<std::future<void>> running;
    for (std::size_t i = start; i < std::min(points.size(), start + jobs); ++i) {
      if (jobs == 1) {
        run_point(i);
      } else {
        running.push_back(std::async(std::launch::async, run_point, i));
      }
    }
    for (auto& fut : running) fut.get();
  }
  for (std::size_t i = 1; i < result.table.size(); ++i) {
    if (result.table[i].validation.rmse < result.table[result.best_index].validation.rmse) {
      result.best_index = i;
    }
  }
  result.best = result.table[result.best_index].hyper;
  return result;
}

}  // namespace mvkm
