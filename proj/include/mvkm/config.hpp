#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mvkm/data.hpp"
#include "mvkm/eval.hpp"
#include "mvkm/model.hpp"
#include "mvkm/synth.hpp"
#include "mvkm/train.hpp"

namespace mvkm {

using Json = nlohmann::ordered_json;

// Readers start from `base` and override only the keys present. Unknown
// keys and wrongly typed values raise ConfigError naming the key.

Json to_json(const HyperParams& hp);
HyperParams hyper_from_json(const Json& j, HyperParams base = {});

Json to_json(const SynthConfig& cfg);
SynthConfig synth_from_json(const Json& j, SynthConfig base = {});

Json to_json(const ViewSpec& view);
ViewSpec view_spec_from_json(const Json& j);

Json to_json(const LoadOptions& options);
LoadOptions load_options_from_json(const Json& j);

/// Grid lists; `base` fills every dimension without a list.
Json to_json(const HyperGrid& grid);
HyperGrid grid_from_json(const Json& j, const HyperParams& base);

struct EvalSettings {
  int folds = 5;
  double prefix_fraction = 0.5;
  int jobs = 1;
  /// View name; defaults to the lowest-id graded view.
  std::optional<std::string> graded_view;
  std::vector<std::string> methods{"full", "base", "no-penalty", "avg"};
};

struct AnalysisSettings {
  int student_clusters = 0;
  int material_clusters = 0;
  /// View names clustered together; empty means all views.
  std::vector<std::string> material_views;
  bool bias_correlation = false;
  std::optional<std::string> graded_view;
};

/// Whole-run configuration with one section per module:
/// `data`, `synth`, `train`, `eval`, `grid`, `analysis`, plus a top-level `seed`.
struct RunConfig {
  std::optional<std::uint64_t> seed;
  LoadOptions data;
  SynthConfig synth;
  HyperParams train;
  Ablation ablation = Ablation::full;
  EvalSettings eval;
  std::optional<Json> grid;
  AnalysisSettings analysis;
};

RunConfig run_config_from_json(const Json& j);
/// Parses text; syntax errors raise ConfigError.
RunConfig parse_run_config(const std::string& text);
Json to_json(const RunConfig& cfg);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::uint64_t fnv1a(std::string_view bytes);
std::string hex64(std::uint64_t value);

}  // namespace mvkm
