// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "json.hpp"
#include "mvkm/analysis.hpp"
#include "mvkm/eval.hpp"
#include "mvkm/io.hpp"
#include "mvkm/synth.hpp"
#include "mvkm/train.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mvkm;
using namespace mvkm::testing;

namespace {

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail, double seconds) {
  std::printf("%s  criterion %2d  %-28s %s  [%.1fs]\n", pass ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c, d);
  return buf;
}

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

// Table 4 hyperparameters: K=3, C=3, omega=0.2, gamma=(1, 0.1), eta=0.1, m=1,
// lambda_t=0.01, lambda_s=0.001.
HyperParams table4() { return HyperParams{}; }

void gradient_check() {
  Stopwatch clock;
  double worst = 0.0;
  int instances = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    const Index M = 2 + static_cast<Index>(seed % 4);
    const Index A = 2 + static_cast<Index>((seed / 2) % 4);
    const Index K = 1 + static_cast<Index>(seed % 3);
    const Index C = 1 + static_cast<Index>((seed / 3) % 3);
    auto t = tiny_instance(seed, M, A, K, C, seed % 3 == 0);
    t.hp.markov_step = 1 + static_cast<int>(seed % 3);
    const Eigen::VectorXd analytic = flatten(objective_gradient(t.params, t.records, t.hp));
    const Eigen::VectorXd numeric =
        central_difference(t.params, [&](const ModelParams& p) { return objective(p, t.records, t.hp).total; });
    worst = std::max(worst, scaled_max_error(analytic, numeric));
    ++instances;
  }
  report(1, "gradient correctness", worst < 1e-4,
         fmt("worst relative error %.2e < 1e-4 over %.0f instances (M,A<=5, K,C<=3)", worst, instances),
         clock.seconds());
}

void objective_oracle() {
  Stopwatch clock;
  double worst = 0.0;
  for (std::uint64_t seed = 101; seed <= 120; ++seed) {
    auto t = tiny_instance(seed, 2 + static_cast<Index>(seed % 4), 2 + static_cast<Index>(seed % 5),
                           1 + static_cast<Index>(seed % 3), 1 + static_cast<Index>((seed / 3) % 3), seed % 2 == 0);
    t.hp.omega = seed % 5 == 0 ? 0.0 : 0.25;
    t.hp.markov_step = 1 + static_cast<int>(seed % 2);
    worst = std::max(worst, std::abs(objective(t.params, t.records, t.hp).total - objective_loops(t.params, t.records, t.hp)));
  }
  report(2, "objective oracle", worst <= 1e-8, fmt("max |objective - loop oracle| = %.2e <= 1e-8 on 20 instances", worst),
         clock.seconds());
}

void simplex_feasibility() {
  Stopwatch clock;
  std::size_t epochs = 0;
  std::string problem;
  auto ng = synthetic_ng_config();
  ng.num_students = 300;
  auto g = synthetic_g_config();
  g.num_students = 300;
  auto ng2 = synthetic_ng2_config();
  ng2.num_students = 300;
  for (const auto& cfg : {ng, g, ng2}) {
    const auto ds = generate(cfg).data;
    for (auto ablation : {Ablation::full, Ablation::base}) {
      auto hp = table4();
      hp.epochs = 30;
      hp.early_stop_window = 0;
      fit(ds, hp, ablation, [&](int, const ModelParams& p) {
        ++epochs;
        const auto check = validate_params(p, true, 1e-6);
        if (!check.ok && problem.empty()) problem = check.message;
      });
    }
  }
  report(3, "simplex feasibility", problem.empty(),
         problem.empty() ? fmt("S rows and Q columns on the simplex (1e-6) after all %.0f epochs", epochs) : problem,
         clock.seconds());
}

struct C4Outcome {
  std::vector<AccessEvent> log;
  Dataset data;
  EvalOptions options;
};

C4Outcome synthetic_reproduction() {
  Stopwatch clock;
  C4Outcome out;
  out.data = generate(synthetic_ng_config()).data;
  out.options.folds = 5;
  out.options.jobs = static_cast<int>(std::clamp(std::thread::hardware_concurrency(), 1u, 5u));

  std::map<Method, double> rmse;
  for (auto method : {Method::mvkm, Method::mvkm_base, Method::mvkm_no_penalty, Method::avg}) {
    auto opts = out.options;
    if (method == Method::mvkm) opts.access_log = &out.log;
    rmse[method] = evaluate_online(out.data, table4(), method, opts).rmse_mean;
  }
  const double full = rmse[Method::mvkm];
  const double base = rmse[Method::mvkm_base];
  const double wop = rmse[Method::mvkm_no_penalty];
  const double avg = rmse[Method::avg];
  const bool order = full < base && base < avg;
  const bool penalty = full <= wop;
  const bool bound = full <= 0.20;
  const double seconds = clock.seconds();
  std::string detail = fmt("RMSE MVKM %.4f, Base %.4f, W/O-P %.4f, AVG %.4f", full, base, wop, avg);
  detail += order ? "; MVKM<Base<AVG ok" : "; MVKM<Base<AVG violated";
  detail += penalty ? "; MVKM<=W/O-P ok" : "; MVKM<=W/O-P violated";
  detail += bound ? "; MVKM<=0.20 ok" : "; MVKM<=0.20 violated";
  detail += seconds < 900.0 ? "; runtime ok" : "; runtime over 15 min";
  report(4, "synthetic reproduction", order && penalty && bound && seconds < 900.0, detail, seconds);
  return out;
}

void self_recovery() {
  Stopwatch clock;
  auto cfg = synthetic_ng_config();
  cfg.view2_graded = true;
  cfg.clip_scores = false;
  cfg.forget_threshold = 0.0;
  const auto ds = generate(cfg).data;
  auto hp = table4();
  hp.omega = 0.0;
  hp.gamma = {1.0, 1.0};
  hp.lambda_t = 0.001;
  hp.lambda_s = 0.001;
  hp.epochs = 100;
  hp.early_stop_window = 0;
  const auto result = fit(ds, hp);
  std::vector<double> pred;
  std::vector<double> actual;
  for (const auto& x : ds.records()) {
    pred.push_back(predict(result.params, x));
    actual.push_back(x.value);
  }
  const double rmse = metrics(pred, actual).rmse;
  report(5, "self-recovery", rmse < 0.05 && result.epochs_run <= 100,
         fmt("train RMSE %.4f < 0.05 after %.0f epochs", rmse, result.epochs_run), clock.seconds());
}

void penalty_effect() {
  Stopwatch clock;
  auto cfg = synthetic_ng_config();
  cfg.forget_threshold = 0.0;
  const auto ds = generate(cfg).data;
  auto hp = table4();
  hp.lambda_t = 0.001;
  hp.lambda_s = 0.001;
  hp.markov_step = 3;

  auto fractions = [&](double omega) {
    auto h = hp;
    h.omega = omega;
    const auto curves = knowledge_curves(fit(ds, h).params);
    std::vector<double> per_concept;
    for (Index c = 0; c < curves.values.cols(); ++c) {
      per_concept.push_back(nondecreasing_fraction(CurveTable{{c}, curves.values.col(c)}));
    }
    return std::make_pair(per_concept, nondecreasing_fraction(curves));
  };
  const auto [with_penalty, overall_with] = fractions(0.2);
  const auto [without, overall_without] = fractions(0.0);
  const double worst = *std::min_element(with_penalty.begin(), with_penalty.end());
  std::string detail = fmt("omega=0.2: min per-concept fraction %.3f >= 0.90; omega=0: overall %.3f < %.3f", worst,
                           overall_without, overall_with);
  report(6, "penalty effect", worst >= 0.9 && overall_without < overall_with, detail, clock.seconds());
}

void bias_difficulty() {
  Stopwatch clock;
  const auto ds = generate(synthetic_ng_config()).data;
  auto hp = table4();
  hp.eta = 0.01;
  const double rho = bias_score_correlation(fit(ds, hp).params, ds, 0);
  report(7, "bias-difficulty correlation", rho > 0.5, fmt("Spearman rho(b_p, mean score) = %.3f > 0.5", rho),
         clock.seconds());
}

void planted_structure() {
  Stopwatch clock;
  // Two learner archetypes with disjoint gain ranges.
  auto a_cfg = synthetic_g_config();
  a_cfg.archetype_gains = {{0.02, 0.06}, {0.2, 0.35}};
  const auto archetypes = generate(a_cfg);
  auto a_hp = table4();
  a_hp.latent_dim = 2;
  a_hp.gamma = {1.0, 0.4};
  a_hp.omega = 0.1;
  a_hp.lambda_t = 0.001;
  const auto students =
      student_clusters(fit(archetypes.data, a_hp).params, archetypes.data.student_ids(), 2, 42);
  std::size_t agree = 0;
  for (std::size_t i = 0; i < students.labels.size(); ++i) agree += students.labels[i] == archetypes.truth.archetype[i];
  const double match = std::max(agree, students.labels.size() - agree) / static_cast<double>(students.labels.size());

  // View-1 material j shares its concept column with view-0 material j mod P0.
  auto t_cfg = synthetic_g_config();
  t_cfg.twin_materials = true;
  t_cfg.clip_scores = false;
  t_cfg.init_high = 1.0;
  t_cfg.gain_low = 0.0;
  t_cfg.gain_high = 0.02;
  t_cfg.forget_threshold = 0.0;
  t_cfg.concept_purity = 0.7;
  const auto twins = generate(t_cfg);
  auto t_hp = table4();
  t_hp.gamma = {1.0, 1.0};
  t_hp.omega = 0.01;
  t_hp.eta = 0.05;
  t_hp.lambda_t = 0.001;
  t_hp.early_stop_window = 0;
  const std::vector<int> views{0, 1};
  const auto materials = material_clusters(fit(twins.data, t_hp).params, twins.data.views(), views, 3, 42);
  const auto P0 = static_cast<std::size_t>(t_cfg.materials_per_view[0]);
  const auto P1 = static_cast<std::size_t>(t_cfg.materials_per_view[1]);
  std::size_t same = 0;
  for (std::size_t j = 0; j < P1; ++j) same += materials.labels[P0 + j] == materials.labels[j % P0];
  const double rate = static_cast<double>(same) / static_cast<double>(P1);
  std::map<int, double> sizes;
  for (int l : materials.labels) sizes[l] += 1.0;
  const double n = static_cast<double>(materials.labels.size());
  double chance = 0.0;
  for (const auto& [label, size] : sizes) chance += size * (size - 1.0) / (n * (n - 1.0));

  report(8, "planted-structure recovery", match >= 0.9 && rate > chance,
         fmt("archetype agreement %.3f >= 0.90; twin co-cluster rate %.3f > chance %.3f", match, rate, chance),
         clock.seconds());
}

void protocol_audit(const C4Outcome& c4) {
  Stopwatch clock;
  const auto& ds = c4.data;
  const auto splits = split_student_stratified(ds, c4.options.folds, c4.options.seed);
  std::set<std::tuple<int, Index, Index>> expected;
  for (std::size_t f = 0; f < splits.size(); ++f) {
    for (Index s : splits[f].test) {
      for (const auto& x : split_prefix_suffix(ds, s, 0, c4.options.prefix_fraction).suffix) {
        if (x.view == 0) expected.insert({static_cast<int>(f), x.student, x.attempt});
      }
    }
  }
  std::map<std::pair<Index, Index>, int> view_of;
  for (const auto& x : ds.records()) view_of[{x.student, x.attempt}] = x.view;

  std::size_t violations = 0;
  std::set<std::tuple<int, Index, Index>> predicted;
  std::set<std::tuple<int, Index, Index>> revealed;
  for (std::size_t i = 0; i < c4.log.size(); ++i) {
    const auto& e = c4.log[i];
    const auto key = std::make_tuple(e.fold, e.student, e.attempt);
    if (e.kind == AccessEvent::Kind::predict) {
      if (revealed.count(key) || !predicted.insert(key).second) ++violations;
      continue;
    }
    if (!revealed.insert(key).second) ++violations;
    if (view_of.at({e.student, e.attempt}) == 0) {
      const bool preceded = i > 0 && c4.log[i - 1].kind == AccessEvent::Kind::predict &&
                            c4.log[i - 1].student == e.student && c4.log[i - 1].attempt == e.attempt;
      if (!preceded || !predicted.count(key)) ++violations;
    }
  }
  const bool complete = predicted == expected;
  std::ostringstream detail;
  detail << c4.log.size() << " events, " << predicted.size() << " predictions, " << violations
         << " reads before prediction" << (complete ? ", every graded suffix record predicted" : ", coverage mismatch");
  report(9, "protocol audit", violations == 0 && complete && !c4.log.empty(), detail.str(), clock.seconds());
}

void determinism() {
  Stopwatch clock;
  TempDir root("acceptance");
  const std::string exe = MVKM_EXE;
  write_text_file(root.file("c.json"),
                  R"({"seed": 7, "synth": {"num_students": 120}, "train": {"epochs": 10, "fold_in_epochs": 10},)"
                  R"( "eval": {"folds": 3, "jobs": 3}})");
  const std::vector<std::string> commands{
      "synth --config ../c.json --out d.csv",
      "validate --data d.csv",
      "train --data d.csv --config ../c.json --out m.json",
      "eval --data d.csv --config ../c.json --out r.json --access-log log.csv",
      "analyze --model m.json --data d.csv --curves curves.csv --cluster-students 2 --cluster-materials 3 "
      "--bias-corr --out an",
  };
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    std::filesystem::create_directories(root.path() / run);
    for (const auto& cmd : commands) {
      const std::string line = "cd '" + (root.path() / run).string() + "' && '" + exe + "' " + cmd + " > /dev/null";
      if (std::system(line.c_str()) != 0) ok = false;
    }
  }
  std::size_t compared = 0;
  std::size_t differing = 0;
  for (const auto& entry : std::filesystem::directory_iterator(root.path() / "a")) {
    const auto name = entry.path().filename().string();
    const auto other = root.path() / "b" / name;
    if (!std::filesystem::exists(other)) {
      ++differing;
      continue;
    }
    std::string x = read_text_file(entry.path());
    std::string y = read_text_file(other);
    if (name.ends_with(".manifest.json")) {
      // Wall time is the one field allowed to differ.
      auto mx = nlohmann::ordered_json::parse(x);
      auto my = nlohmann::ordered_json::parse(y);
      mx.erase("wall_time_seconds");
      my.erase("wall_time_seconds");
      x = mx.dump();
      y = my.dump();
    }
    ++compared;
    if (x != y) ++differing;
  }
  report(10, "determinism", ok && compared >= 20 && differing == 0,
         fmt("%.0f files compared across two runs, %.0f differ (manifests compared without wall time)", compared,
             differing),
         clock.seconds());
}

}  // namespace

int main() {
  gradient_check();
  objective_oracle();
  simplex_feasibility();
  const auto c4 = synthetic_reproduction();
  self_recovery();
  penalty_effect();
  bias_difficulty();
  planted_structure();
  protocol_audit(c4);
  determinism();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
