#include "mvkm/config.hpp"

#include <cstdio>
#include <set>
#include <type_traits>

#include "mvkm/errors.hpp"

namespace mvkm {

namespace {

template <typename T>
struct is_vector : std::false_type {};
template <typename T>
struct is_vector<std::vector<T>> : std::true_type {};

/// Reads the keys of one JSON object and rejects any it did not consume.
class Section {
public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(label() + "must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <typename T>
  void read(const char* key, T& out) {
    used_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, path_.empty() ? key : path_ + "." + key);
  }

  const Json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError("unknown config key '" + (path_.empty() ? key : path_ + "." + key) + "'");
    }
  }

  template <typename T>
  static T convert(const Json& v, const std::string& where) {
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError(where + ": expected a boolean");
        return v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError(where + ": expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0) {
          throw ConfigError(where + ": expected a nonnegative integer");
        }
        return v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        return v.get<T>();
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError(where + ": expected a string");
        return v.get<std::string>();
      } else if constexpr (std::is_same_v<T, std::optional<std::string>>) {
        if (v.is_null()) return std::nullopt;
        return convert<std::string>(v, where);
      } else if constexpr (std::is_same_v<T, std::optional<bool>>) {
        if (v.is_null()) return std::nullopt;
        return convert<bool>(v, where);
      } else if constexpr (std::is_same_v<T, std::pair<double, double>>) {
        if (!v.is_array() || v.size() != 2) throw ConfigError(where + ": expected a [low, high] pair");
        return {convert<double>(v[0], where), convert<double>(v[1], where)};
      } else if constexpr (is_vector<T>::value) {
        if (!v.is_array()) throw ConfigError(where + ": expected an array");
        T out;
        for (std::size_t i = 0; i < v.size(); ++i) {
          out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
        }
        return out;
      } else {
        static_assert(sizeof(T) == 0, "unsupported config type");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

private:
  std::string label() const { return path_.empty() ? "config " : "config section '" + path_ + "' "; }

  const Json& j_;
  std::string path_;
  std::set<std::string> used_;
};

void read_hyper_keys(Section& sec, HyperParams& hp) {
  sec.read("latent_dim", hp.latent_dim);
  sec.read("num_concepts", hp.num_concepts);
  sec.read("omega", hp.omega);
  sec.read("gamma", hp.gamma);
  sec.read("eta", hp.eta);
  sec.read("markov_step", hp.markov_step);
  sec.read("lambda_t", hp.lambda_t);
  sec.read("lambda_s", hp.lambda_s);
  sec.read("epochs", hp.epochs);
  sec.read("seed", hp.seed);
  sec.read("batch_size", hp.batch_size);
  sec.read("constrain_s", hp.constrain_s);
  sec.read("shared_attempt_bias", hp.shared_attempt_bias);
  sec.read("early_stop_tol", hp.early_stop_tol);
  sec.read("early_stop_window", hp.early_stop_window);
  sec.read("fold_in_epochs", hp.fold_in_epochs);
}

SynthConfig synth_preset(const std::string& name) {
  if (name == "synthetic_ng") return synthetic_ng_config();
  if (name == "synthetic_g") return synthetic_g_config();
  if (name == "synthetic_ng2") return synthetic_ng2_config();
  throw ConfigError("synth.preset: unknown preset '" + name + "' (expected synthetic_ng, synthetic_g or synthetic_ng2)");
}

}  // namespace

Json to_json(const HyperParams& hp) {
  return Json{{"latent_dim", hp.latent_dim},
              {"num_concepts", hp.num_concepts},
              {"omega", hp.omega},
              {"gamma", hp.gamma},
              {"eta", hp.eta},
              {"markov_step", hp.markov_step},
              {"lambda_t", hp.lambda_t},
              {"lambda_s", hp.lambda_s},
              {"epochs", hp.epochs},
              {"seed", hp.seed},
              {"batch_size", hp.batch_size},
              {"constrain_s", hp.constrain_s},
              {"shared_attempt_bias", hp.shared_attempt_bias},
              {"early_stop_tol", hp.early_stop_tol},
              {"early_stop_window", hp.early_stop_window},
              {"fold_in_epochs", hp.fold_in_epochs}};
}

HyperParams hyper_from_json(const Json& j, HyperParams base) {
  Section sec(j, "train");
  read_hyper_keys(sec, base);
  sec.finish();
  return base;
}

Json to_json(const SynthConfig& cfg) {
  Json gains = Json::array();
  for (const auto& [lo, hi] : cfg.archetype_gains) gains.push_back(Json::array({lo, hi}));
  return Json{{"num_students", cfg.num_students},
              {"materials_per_view", cfg.materials_per_view},
              {"num_concepts", cfg.num_concepts},
              {"seq_len", cfg.seq_len},
              {"min_seq_len", cfg.min_seq_len},
              {"forget_threshold", cfg.forget_threshold},
              {"gain_low", cfg.gain_low},
              {"gain_high", cfg.gain_high},
              {"forget_magnitude", cfg.forget_magnitude},
              {"init_low", cfg.init_low},
              {"init_high", cfg.init_high},
              {"clip_scores", cfg.clip_scores},
              {"view2_graded", cfg.view2_graded},
              {"view_names", cfg.view_names},
              {"archetype_gains", gains},
              {"twin_materials", cfg.twin_materials},
              {"concept_purity", cfg.concept_purity},
              {"seed", cfg.seed}};
}

SynthConfig synth_from_json(const Json& j, SynthConfig base) {
  Section sec(j, "synth");
  std::string preset;
  sec.read("preset", preset);
  if (!preset.empty()) {
    const auto seed = base.seed;
    base = synth_preset(preset);
    base.seed = seed;
  }
  sec.read("num_students", base.num_students);
  sec.read("materials_per_view", base.materials_per_view);
  sec.read("num_concepts", base.num_concepts);
  sec.read("seq_len", base.seq_len);
  sec.read("min_seq_len", base.min_seq_len);
  sec.read("forget_threshold", base.forget_threshold);
  sec.read("gain_low", base.gain_low);
  sec.read("gain_high", base.gain_high);
  sec.read("forget_magnitude", base.forget_magnitude);
  sec.read("init_low", base.init_low);
  sec.read("init_high", base.init_high);
  sec.read("clip_scores", base.clip_scores);
  sec.read("view2_graded", base.view2_graded);
  sec.read("view_names", base.view_names);
  sec.read("archetype_gains", base.archetype_gains);
  sec.read("twin_materials", base.twin_materials);
  sec.read("concept_purity", base.concept_purity);
  sec.read("seed", base.seed);
  sec.finish();
  return base;
}

Json to_json(const ViewSpec& view) {
  return Json{{"id", view.id},
              {"name", view.name},
              {"graded", view.graded},
              {"num_materials", view.num_materials},
              {"material_ids", view.material_ids}};
}

ViewSpec view_spec_from_json(const Json& j) {
  Section sec(j, "view");
  ViewSpec v;
  sec.read("id", v.id);
  sec.read("name", v.name);
  sec.read("graded", v.graded);
  sec.read("num_materials", v.num_materials);
  sec.read("material_ids", v.material_ids);
  sec.finish();
  if (static_cast<Index>(v.material_ids.size()) != v.num_materials) {
    throw ConfigError("view '" + v.name + "': material_ids does not match num_materials");
  }
  return v;
}

Json to_json(const LoadOptions& options) {
  Json views = Json::array();
  for (const auto& v : options.views) {
    Json o{{"name", v.name}};
    o["graded"] = v.graded ? Json(*v.graded) : Json(nullptr);
    o["max_score"] = v.max_score;
    views.push_back(std::move(o));
  }
  return Json{{"views", views}};
}

LoadOptions load_options_from_json(const Json& j) {
  Section sec(j, "data");
  LoadOptions out;
  if (sec.has("views")) {
    const Json& views = sec.raw("views");
    if (!views.is_array()) throw ConfigError("data.views: expected an array");
    for (std::size_t i = 0; i < views.size(); ++i) {
      Section v(views[i], "data.views[" + std::to_string(i) + "]");
      ViewOptions opt;
      v.read("name", opt.name);
      v.read("graded", opt.graded);
      v.read("max_score", opt.max_score);
      v.finish();
      if (opt.name.empty()) throw ConfigError("data.views[" + std::to_string(i) + "]: name is required");
      if (!(opt.max_score > 0.0)) throw ConfigError("data.views[" + std::to_string(i) + "]: max_score must be > 0");
      out.views.push_back(std::move(opt));
    }
  }
  sec.finish();
  return out;
}

Json to_json(const HyperGrid& grid) {
  return Json{{"latent_dim", grid.latent_dim}, {"num_concepts", grid.num_concepts},
              {"omega", grid.omega},           {"markov_step", grid.markov_step},
              {"gamma", grid.gamma},           {"eta", grid.eta},
              {"lambda_t", grid.lambda_t},     {"lambda_s", grid.lambda_s}};
}

HyperGrid grid_from_json(const Json& j, const HyperParams& base) {
  Section sec(j, "grid");
  HyperGrid grid;
  grid.base = base;
  sec.read("latent_dim", grid.latent_dim);
  sec.read("num_concepts", grid.num_concepts);
  sec.read("omega", grid.omega);
  sec.read("markov_step", grid.markov_step);
  sec.read("gamma", grid.gamma);
  sec.read("eta", grid.eta);
  sec.read("lambda_t", grid.lambda_t);
  sec.read("lambda_s", grid.lambda_s);
  sec.finish();
  for (const auto& hp : grid.expand()) hp.validate();
  return grid;
}

RunConfig run_config_from_json(const Json& j) {
  Section top(j, "");
  RunConfig cfg;
  if (top.has("seed")) {
    std::uint64_t seed = 0;
    top.read("seed", seed);
    cfg.seed = seed;
  }
  for (const char* section : {"synth", "train"}) {
    if (top.has(section) && j.at(section).is_object() && j.at(section).contains("seed")) {
      throw ConfigError(std::string(section) + ".seed: use the top-level seed");
    }
  }
  if (top.has("data")) cfg.data = load_options_from_json(top.raw("data"));
  if (top.has("synth")) cfg.synth = synth_from_json(top.raw("synth"));
  if (top.has("train")) {
    Section sec(top.raw("train"), "train");
    read_hyper_keys(sec, cfg.train);
    std::string ablation = to_string(cfg.ablation);
    sec.read("ablation", ablation);
    try {
      cfg.ablation = ablation_from_string(ablation);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("train.ablation: ") + e.what());
    }
    sec.finish();
  }
  if (top.has("eval")) {
    Section sec(top.raw("eval"), "eval");
    sec.read("folds", cfg.eval.folds);
    sec.read("prefix_fraction", cfg.eval.prefix_fraction);
    sec.read("jobs", cfg.eval.jobs);
    sec.read("graded_view", cfg.eval.graded_view);
    sec.read("methods", cfg.eval.methods);
    sec.finish();
  }
  if (top.has("grid")) {
    cfg.grid = top.raw("grid");
    grid_from_json(*cfg.grid, cfg.train);
  }
  if (top.has("analysis")) {
    Section sec(top.raw("analysis"), "analysis");
    sec.read("student_clusters", cfg.analysis.student_clusters);
    sec.read("material_clusters", cfg.analysis.material_clusters);
    sec.read("material_views", cfg.analysis.material_views);
    sec.read("bias_correlation", cfg.analysis.bias_correlation);
    sec.read("graded_view", cfg.analysis.graded_view);
    sec.finish();
  }
  top.finish();

  cfg.synth.validate();
  cfg.train.validate();
  if (cfg.eval.folds < 2) throw ConfigError("eval.folds must be >= 2");
  if (!(cfg.eval.prefix_fraction > 0.0 && cfg.eval.prefix_fraction < 1.0)) {
    throw ConfigError("eval.prefix_fraction must lie in (0, 1)");
  }
  if (cfg.eval.jobs < 1) throw ConfigError("eval.jobs must be >= 1");
  for (const auto& m : cfg.eval.methods) {
    try {
      method_from_string(m);
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("eval.methods: ") + e.what());
    }
  }
  if (cfg.analysis.student_clusters < 0 || cfg.analysis.material_clusters < 0) {
    throw ConfigError("analysis cluster counts must be >= 0");
  }
  return cfg;
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

Json to_json(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed ? Json(*cfg.seed) : Json(nullptr);
  j["data"] = to_json(cfg.data);
  j["synth"] = to_json(cfg.synth);
  j["synth"].erase("seed");
  Json train = to_json(cfg.train);
  train.erase("seed");
  train["ablation"] = to_string(cfg.ablation);
  j["train"] = std::move(train);
  j["eval"] = Json{{"folds", cfg.eval.folds},
                   {"prefix_fraction", cfg.eval.prefix_fraction},
                   {"jobs", cfg.eval.jobs},
                   {"graded_view", cfg.eval.graded_view ? Json(*cfg.eval.graded_view) : Json(nullptr)},
                   {"methods", cfg.eval.methods}};
  j["grid"] = cfg.grid ? *cfg.grid : Json(nullptr);
  j["analysis"] = Json{{"student_clusters", cfg.analysis.student_clusters},
                       {"material_clusters", cfg.analysis.material_clusters},
                       {"material_views", cfg.analysis.material_views},
                       {"bias_correlation", cfg.analysis.bias_correlation},
                       {"graded_view", cfg.analysis.graded_view ? Json(*cfg.analysis.graded_view) : Json(nullptr)}};
  return j;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace mvkm
