#include "mvkm/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "mvkm/analysis.hpp"
#include "mvkm/config.hpp"
#include "mvkm/errors.hpp"
#include "mvkm/format.hpp"
#include "mvkm/io.hpp"

#ifndef MVKM_VERSION
#define MVKM_VERSION "0.0.0"
#endif

namespace mvkm::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDefaultSeed = 42;

struct Context {
  RunConfig cfg;
  std::uint64_t seed = kDefaultSeed;
  std::string seed_source;
};

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError(origin + ": '" + text + "' is not a non-negative integer seed");
  }
  return value;
}

Context load_context(const std::string& config_path, const std::optional<std::uint64_t>& seed_flag) {
  Context ctx;
  if (!config_path.empty()) ctx.cfg = parse_run_config(read_text_file(config_path));
  if (seed_flag) {
    ctx.seed = *seed_flag;
    ctx.seed_source = "flag";
  } else if (ctx.cfg.seed) {
    ctx.seed = *ctx.cfg.seed;
    ctx.seed_source = "config";
  } else if (const char* env = std::getenv("MVKM_SEED"); env != nullptr && *env != '\0') {
    ctx.seed = parse_seed(env, "MVKM_SEED");
    ctx.seed_source = "env";
  } else {
    ctx.seed_source = "default";
  }
  ctx.cfg.seed = ctx.seed;
  ctx.cfg.synth.seed = ctx.seed;
  ctx.cfg.train.seed = ctx.seed;
  return ctx;
}

std::string file_hash(const fs::path& path) { return hex64(fnv1a(read_text_file(path))); }

std::string eigen_version() {
  return std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
         std::to_string(EIGEN_MINOR_VERSION);
}

/// Collects outputs and inputs for the manifests of one command.
class Run {
public:
  Run(std::string command, std::vector<std::string> args, const Context& ctx)
      : command_(std::move(command)), args_(std::move(args)), ctx_(ctx),
        start_(std::chrono::steady_clock::now()) {}

  void input(const std::string& role, const fs::path& path) { inputs_[role] = {path.string(), file_hash(path)}; }

  void write(const fs::path& path, const std::string& content) {
    write_text_file(path, content);
    record(path);
  }
  void record(const fs::path& path) { outputs_.push_back(path.string()); }

  void finish() const {
    const double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    const std::string config_text = to_json(ctx_.cfg).dump();
    Json inputs = Json::object();
    for (const auto& [role, entry] : inputs_) inputs[role] = Json{{"path", entry.first}, {"fnv1a", entry.second}};
    for (const auto& out : outputs_) {
      Json m;
      m["tool"] = "mvkm";
      m["version"] = MVKM_VERSION;
      m["command"] = command_;
      m["args"] = args_;
      m["output"] = out;
      m["outputs"] = outputs_;
      m["seed"] = ctx_.seed;
      m["seed_source"] = ctx_.seed_source;
      m["config"] = to_json(ctx_.cfg);
      m["config_hash"] = hex64(fnv1a(config_text));
      m["inputs"] = inputs;
      m["eigen_version"] = eigen_version();
      m["wall_time_seconds"] = wall;
      write_text_file(out + ".manifest.json", m.dump(2) + "\n");
    }
  }

  const std::vector<std::string>& outputs() const { return outputs_; }

private:
  std::string command_;
  std::vector<std::string> args_;
  const Context& ctx_;
  std::chrono::steady_clock::time_point start_;
  std::map<std::string, std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> outputs_;
};

Dataset load_data(const Context& ctx, const fs::path& path) {
  if (!fs::exists(path)) throw IoError("cannot open '" + path.string() + "': no such file");
  return load_dataset(path, ctx.cfg.data);
}

int resolve_view(const Dataset& ds, const std::optional<std::string>& name) {
  if (name) {
    for (const auto& v : ds.views()) {
      if (v.name == *name) return v.id;
    }
    throw ArgumentError("no view named '" + *name + "'");
  }
  const auto graded = ds.primary_graded_view();
  if (!graded) throw ArgumentError("dataset has no graded view");
  return *graded;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

std::string history_csv(const FitResult& result) {
  std::string out = "epoch,total,l1,l2,reconstruction,regularization,penalty_terms\n";
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    const auto& h = result.history[e];
    out += std::to_string(e + 1) + "," + format_double(h.total) + "," + format_double(h.l1) + "," +
           format_double(h.l2) + "," + format_double(h.reconstruction) + "," +
           format_double(h.regularization) + "," + std::to_string(h.penalty_terms) + "\n";
  }
  return out;
}

Json metrics_json(const ErrorMetrics& m) {
  return Json{{"rmse", m.rmse}, {"mae", m.mae}, {"count", m.count}};
}

Json report_json(const EvalReport& r) {
  Json j;
  j["method"] = r.method;
  j["hyperparameters"] = to_json(r.hyper);
  Json folds = Json::array();
  for (const auto& f : r.folds) {
    folds.push_back(Json{{"fold", f.fold},
                         {"rmse", f.metrics.rmse},
                         {"mae", f.metrics.mae},
                         {"count", f.metrics.count},
                         {"train_students", f.train_students},
                         {"test_students", f.test_students}});
  }
  j["folds"] = folds;
  j["rmse_mean"] = r.rmse_mean;
  j["rmse_var"] = r.rmse_var;
  j["mae_mean"] = r.mae_mean;
  j["mae_var"] = r.mae_var;
  Json per_attempt = Json::array();
  for (const auto& a : r.per_attempt) {
    per_attempt.push_back(Json{{"attempt", a.attempt}, {"count", a.count}, {"rmse", a.rmse}, {"mae", a.mae}});
  }
  j["per_attempt"] = per_attempt;
  return j;
}

std::string access_log_csv(const std::vector<AccessEvent>& log) {
  std::string out = "fold,kind,student,attempt\n";
  for (const auto& e : log) {
    out += std::to_string(e.fold) + "," + (e.kind == AccessEvent::Kind::predict ? "predict" : "reveal") + "," +
           std::to_string(e.student) + "," + std::to_string(e.attempt) + "\n";
  }
  return out;
}

EvalOptions eval_options(const Context& ctx, const Dataset& ds) {
  EvalOptions options;
  options.folds = ctx.cfg.eval.folds;
  options.seed = ctx.seed;
  options.prefix_fraction = ctx.cfg.eval.prefix_fraction;
  options.jobs = ctx.cfg.eval.jobs;
  options.graded_view = resolve_view(ds, ctx.cfg.eval.graded_view);
  return options;
}

// Subcommand bodies. Flags were already folded into ctx.cfg.

int do_validate(std::ostream& out, const Context& ctx, const std::string& data) {
  const auto ds = load_data(ctx, data);
  out << "ok: " << ds.num_students() << " students, " << ds.records().size() << " records, "
      << ds.max_attempts() << " attempts\n";
  for (const auto& v : ds.views()) {
    out << "  view " << v.id << " '" << v.name << "': " << (v.graded ? "graded" : "non-graded") << ", "
        << v.num_materials << " materials\n";
  }
  return kOk;
}

int do_synth(std::ostream& out, Run& run, const Context& ctx, const fs::path& target) {
  const auto result = generate(ctx.cfg.synth);
  save_dataset(result.data, target);
  run.record(target);
  run.write(target.string() + ".truth.json", truth_to_json(result.truth));
  out << "wrote " << result.data.records().size() << " records for " << result.data.num_students()
      << " students to " << target.string() << "\n";
  return kOk;
}

int do_train(std::ostream& out, Run& run, const Context& ctx, const fs::path& data, const fs::path& target) {
  const auto ds = load_data(ctx, data);
  run.input("data", data);
  const auto result = fit(ds, ctx.cfg.train, ctx.cfg.ablation);
  Checkpoint ckpt{result.params, effective_hyper(ctx.cfg.train, ctx.cfg.ablation), ds.student_ids(), ds.views()};
  run.write(target, checkpoint_to_json(ckpt));
  run.write(target.string() + ".history.csv", history_csv(result));
  out << "trained " << to_string(ctx.cfg.ablation) << " for " << result.epochs_run << " epochs";
  if (!result.history.empty()) out << ", final objective " << format_double(result.history.back().total);
  out << "\n";
  return kOk;
}

int do_eval(std::ostream& out, Run& run, const Context& ctx, const fs::path& data, const fs::path& target,
            const std::string& access_log) {
  const auto ds = load_data(ctx, data);
  run.input("data", data);
  auto options = eval_options(ctx, ds);
  std::vector<AccessEvent> log;
  if (!access_log.empty()) options.access_log = &log;

  Json reports = Json::array();
  for (const auto& name : ctx.cfg.eval.methods) {
    const auto method = method_from_string(name);
    const auto report = evaluate_online(ds, ctx.cfg.train, method, options);
    out << report.method << ": rmse " << format_double(report.rmse_mean) << " (var "
        << format_double(report.rmse_var) << "), mae " << format_double(report.mae_mean) << "\n";
    reports.push_back(report_json(report));
  }
  Json j;
  j["config_hash"] = hex64(fnv1a(to_json(ctx.cfg).dump()));
  j["data_hash"] = file_hash(data);
  j["seed"] = ctx.seed;
  j["folds"] = options.folds;
  j["graded_view"] = ds.view(*options.graded_view).name;
  j["methods"] = reports;
  run.write(target, j.dump(2) + "\n");
  if (!access_log.empty()) run.write(access_log, access_log_csv(log));
  return kOk;
}

int do_grid(std::ostream& out, Run& run, const Context& ctx, const fs::path& data, const fs::path& target) {
  if (!ctx.cfg.grid) throw ConfigError("grid: no grid section (pass --grid or add one to the config)");
  const auto ds = load_data(ctx, data);
  run.input("data", data);
  const auto grid = grid_from_json(*ctx.cfg.grid, ctx.cfg.train);
  const auto result = grid_search(ds, grid, eval_options(ctx, ds));
  Json rows = Json::array();
  for (const auto& row : result.table) {
    rows.push_back(Json{{"hyperparameters", to_json(row.hyper)}, {"validation", metrics_json(row.validation)}});
  }
  Json j;
  j["config_hash"] = hex64(fnv1a(to_json(ctx.cfg).dump()));
  j["data_hash"] = file_hash(data);
  j["seed"] = ctx.seed;
  j["best_index"] = result.best_index;
  j["best"] = to_json(result.best);
  j["table"] = rows;
  run.write(target, j.dump(2) + "\n");
  out << "evaluated " << result.table.size() << " grid points; best validation rmse "
      << format_double(result.table[result.best_index].validation.rmse) << "\n";
  return kOk;
}

struct AnalyzeArgs {
  std::string model;
  std::string data;
  std::string curves;
  std::string prefix;
};

int do_analyze(std::ostream& out, Run& run, const Context& ctx, const AnalyzeArgs& a) {
  const auto& as = ctx.cfg.analysis;
  const bool wants_data = as.student_clusters > 0 || as.bias_correlation;
  if (a.curves.empty() && as.student_clusters == 0 && as.material_clusters == 0 && !as.bias_correlation) {
    throw ArgumentError("analyze: nothing to do (pass --curves, --cluster-students, --cluster-materials or --bias-corr)");
  }
  if ((as.student_clusters > 0 || as.material_clusters > 0 || as.bias_correlation) && a.prefix.empty()) {
    throw ArgumentError("analyze: --out is required for cluster and correlation outputs");
  }
  if (wants_data && a.data.empty()) throw ArgumentError("analyze: --data is required for --cluster-students and --bias-corr");

  if (!fs::exists(a.model)) throw IoError("cannot open '" + a.model + "': no such file");
  const auto ckpt = load_checkpoint(a.model);
  run.input("model", a.model);
  std::optional<Dataset> ds;
  if (!a.data.empty()) {
    Context data_ctx = ctx;
    data_ctx.cfg.data = LoadOptions::from_views(ckpt.views);
    ds = load_data(data_ctx, a.data);
    run.input("data", a.data);
    if (ds->student_ids() != ckpt.student_ids) {
      throw IntegrityError("analyze: dataset students differ from the model's training students");
    }
  }

  if (!a.curves.empty()) {
    const auto curves = knowledge_curves(ckpt.params);
    run.write(a.curves, curves_to_csv(curves));
    out << "knowledge curves: " << format_double(nondecreasing_fraction(curves))
        << " of consecutive steps nondecreasing\n";
  }
  if (as.student_clusters > 0) {
    const auto clusters = student_clusters(ckpt.params, ckpt.student_ids, as.student_clusters, ctx.seed);
    run.write(a.prefix + ".students.csv", clusters_to_csv(clusters));
    const int view = resolve_view(*ds, as.graded_view);
    run.write(a.prefix + ".student_scores.csv", cluster_scores_to_csv(cluster_score_table(clusters, *ds, view)));
    out << "student clusters: " << clusters.num_clusters << "\n";
  }
  if (as.material_clusters > 0) {
    std::vector<int> views;
    if (as.material_views.empty()) {
      for (const auto& v : ckpt.views) views.push_back(v.id);
    } else {
      for (const auto& name : as.material_views) {
        const auto it = std::find_if(ckpt.views.begin(), ckpt.views.end(), [&](const ViewSpec& v) { return v.name == name; });
        if (it == ckpt.views.end()) throw ArgumentError("no view named '" + name + "'");
        views.push_back(it->id);
      }
    }
    const auto clusters = material_clusters(ckpt.params, ckpt.views, views, as.material_clusters, ctx.seed);
    run.write(a.prefix + ".materials.csv", clusters_to_csv(clusters));
    out << "material clusters: " << clusters.num_clusters << "\n";
  }
  if (as.bias_correlation) {
    const int view = resolve_view(*ds, as.graded_view);
    const double rho = bias_score_correlation(ckpt.params, *ds, view);
    run.write(a.prefix + ".bias.csv", "view,spearman\n" + ds->view(view).name + "," + format_double(rho) + "\n");
    out << "bias/score spearman on '" << ds->view(view).name << "': " << format_double(rho) << "\n";
  }
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ArgumentError*>(&e)) return kUsage;
  if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
  if (dynamic_cast<const IoError*>(&e)) return kIo;
  if (dynamic_cast<const TrainingError*>(&e)) return kTraining;
  if (dynamic_cast<const ParseError*>(&e) || dynamic_cast<const IntegrityError*>(&e) ||
      dynamic_cast<const RangeError*>(&e) || dynamic_cast<const EmptySequenceError*>(&e) ||
      dynamic_cast<const DegenerateInputError*>(&e) || dynamic_cast<const ColdStartError*>(&e)) {
    return kData;
  }
  return kFailure;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view knowledge model: synthesize, train, evaluate and analyze."};
  app.name("mvkm");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string("mvkm ") + MVKM_VERSION);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string data;
  std::string target;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration");
    sub->add_option("--seed", seed, "Seed for every stochastic step (overrides config and MVKM_SEED)");
  };

  auto* validate = app.add_subcommand("validate", "Check a dataset against the input schema");
  validate->add_option("--data", data, "Interaction file (.csv or .json)")->required();
  validate->add_option("--config", config_path, "JSON run configuration");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset and its ground truth");
  add_common(synth);
  synth->add_option("--out", target, "Dataset path; truth goes to <out>.truth.json")->required();

  std::string ablation;
  auto* train = app.add_subcommand("train", "Fit a model");
  add_common(train);
  train->add_option("--data", data, "Interaction file")->required();
  train->add_option("--ablation", ablation, "full, base or no-penalty");
  train->add_option("--out", target, "Model path; loss history goes to <out>.history.csv")->required();

  std::string methods;
  std::optional<int> folds;
  std::optional<int> jobs;
  std::string access_log;
  auto* eval = app.add_subcommand("eval", "Cross-validated online next-attempt prediction");
  add_common(eval);
  eval->add_option("--data", data, "Interaction file")->required();
  eval->add_option("--folds", folds, "Number of student folds")->check(CLI::PositiveNumber);
  eval->add_option("--ablations", methods, "Comma list of full, base, no-penalty, avg");
  eval->add_option("--jobs", jobs, "Folds run in parallel")->check(CLI::PositiveNumber);
  eval->add_option("--access-log", access_log, "Write the predict/reveal audit log as CSV");
  eval->add_option("--out", target, "Report path (JSON)")->required();

  std::string grid_path;
  auto* grid = app.add_subcommand("grid", "Hyperparameter grid search on a validation split");
  add_common(grid);
  grid->add_option("--data", data, "Interaction file")->required();
  grid->add_option("--grid", grid_path, "JSON grid file (lists per hyperparameter)");
  grid->add_option("--folds", folds, "Validation holds out 1/folds of the students")->check(CLI::PositiveNumber);
  grid->add_option("--jobs", jobs, "Grid points run in parallel")->check(CLI::PositiveNumber);
  grid->add_option("--out", target, "Result path (JSON)")->required();

  AnalyzeArgs analyze_args;
  std::optional<int> cluster_students;
  std::optional<int> cluster_materials;
  std::string material_views;
  bool bias_corr = false;
  std::string graded_view;
  auto* analyze = app.add_subcommand("analyze", "Knowledge curves, clustering and bias correlation");
  add_common(analyze);
  analyze->add_option("--model", analyze_args.model, "Trained model JSON")->required();
  analyze->add_option("--data", analyze_args.data, "Training data of the model");
  analyze->add_option("--curves", analyze_args.curves, "Mean knowledge curves CSV");
  analyze->add_option("--cluster-students", cluster_students, "Spectral clusters of S")->check(CLI::PositiveNumber);
  analyze->add_option("--cluster-materials", cluster_materials, "Spectral clusters of Q columns")
      ->check(CLI::PositiveNumber);
  analyze->add_option("--material-views", material_views, "Comma list of view names to cluster together");
  analyze->add_flag("--bias-corr", bias_corr, "Spearman correlation of b_p with mean material score");
  analyze->add_option("--graded-view", graded_view, "View used for scores");
  analyze->add_option("--out", analyze_args.prefix, "Prefix for cluster and correlation CSVs");

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  std::vector<std::string> echoed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());

  try {
    Context ctx = load_context(config_path, seed);
    auto& cfg = ctx.cfg;
    if (!ablation.empty()) cfg.ablation = ablation_from_string(ablation);
    if (folds) cfg.eval.folds = *folds;
    if (jobs) cfg.eval.jobs = *jobs;
    if (!methods.empty()) {
      cfg.eval.methods = split_list(methods);
      for (const auto& m : cfg.eval.methods) method_from_string(m);
    }
    if (!grid_path.empty()) cfg.grid = Json::parse(read_text_file(grid_path));
    if (cluster_students) cfg.analysis.student_clusters = *cluster_students;
    if (cluster_materials) cfg.analysis.material_clusters = *cluster_materials;
    if (!material_views.empty()) cfg.analysis.material_views = split_list(material_views);
    if (bias_corr) cfg.analysis.bias_correlation = true;
    if (!graded_view.empty()) cfg.analysis.graded_view = graded_view;
    cfg.train.validate();

    if (command == "validate") return do_validate(out, ctx, data);

    Run run(command, echoed, ctx);
    int code = kOk;
    if (command == "synth") code = do_synth(out, run, ctx, target);
    else if (command == "train") code = do_train(out, run, ctx, data, target);
    else if (command == "eval") code = do_eval(out, run, ctx, data, target, access_log);
    else if (command == "grid") code = do_grid(out, run, ctx, data, target);
    else if (command == "analyze") code = do_analyze(out, run, ctx, analyze_args);
    run.finish();
    return code;
  } catch (const nlohmann::json::parse_error& e) {
    err << "mvkm " << command << ": grid file is not valid JSON: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    err << "mvkm " << command << ": " << e.what() << "\n";
    return exit_code_for(e);
  }
}

int run(int argc, char** argv) {
  return run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

}  // namespace mvkm::cli
