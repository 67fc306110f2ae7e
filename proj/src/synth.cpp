#include "mvkm/synth.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "mvkm/errors.hpp"
#include "mvkm/rng.hpp"

namespace mvkm {

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("synth: " + what);
  };
  require(num_students >= 1, "num_students must be >= 1");
  require(!materials_per_view.empty(), "materials_per_view must list at least one view");
  for (auto p : materials_per_view) require(p >= 1, "every view needs >= 1 material");
  require(view_names.size() >= materials_per_view.size(), "view_names shorter than materials_per_view");
  for (std::size_t i = 0; i < materials_per_view.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) require(view_names[i] != view_names[j], "duplicate view name");
  }
  require(num_concepts >= 1, "num_concepts must be >= 1");
  require(seq_len >= 1, "seq_len must be >= 1");
  require(min_seq_len >= 0 && min_seq_len <= seq_len, "min_seq_len must lie in [0, seq_len]");
  require(forget_threshold >= 0.0 && forget_threshold <= 1.0, "forget_threshold must lie in [0,1]");
  require(forget_magnitude > 0.0, "forget_magnitude must be > 0");
  require(gain_low <= gain_high, "gain_low must not exceed gain_high");
  require(init_low <= init_high, "init_low must not exceed init_high");
  require(concept_purity >= 0.0 && concept_purity <= 1.0, "concept_purity must lie in [0,1]");
  for (const auto& [lo, hi] : archetype_gains) require(lo <= hi, "archetype gain bounds inverted");
}

namespace {

std::string padded(const std::string& prefix, Index i, Index count) {
  const auto width = std::to_string(std::max<Index>(count - 1, 0)).size();
  std::ostringstream ss;
  ss << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
  return ss.str();
}

}  // namespace

SynthResult generate(const SynthConfig& cfg) {
  cfg.validate();
  const auto num_views = static_cast<int>(cfg.materials_per_view.size());
  const Index M = cfg.num_students;
  const Index C = cfg.num_concepts;
  const Index L = cfg.seq_len;

  SynthTruth truth;
  Rng global(derive_seed(cfg.seed, 0));
  for (int r = 0; r < num_views; ++r) {
    const Index P = cfg.materials_per_view[static_cast<std::size_t>(r)];
    Eigen::MatrixXd Qr(C, P);
    for (Index p = 0; p < P; ++p) {
      if (cfg.twin_materials && r > 0) {
        Qr.col(p) = truth.Q.front().col(p % truth.Q.front().cols());
        continue;
      }
      Eigen::VectorXd col(C);
      for (Index c = 0; c < C; ++c) col(c) = global.uniform(1e-3, 1.0);
      Qr.col(p) = (1.0 - cfg.concept_purity) * col / col.sum();
      Qr(p % C, p) += cfg.concept_purity;
    }
    truth.Q.push_back(std::move(Qr));
  }

  // Flattened (view, material) catalogue for uniform material choice.
  std::vector<std::pair<int, Index>> catalogue;
  for (int r = 0; r < num_views; ++r) {
    for (Index p = 0; p < cfg.materials_per_view[static_cast<std::size_t>(r)]; ++p) {
      catalogue.emplace_back(r, p);
    }
  }
  auto graded = [&](int r) { return r == 0 || cfg.view2_graded; };

  std::vector<Eigen::MatrixXd> k_slices(static_cast<std::size_t>(L), Eigen::MatrixXd::Zero(M, C));
  if (!cfg.archetype_gains.empty()) truth.archetype.resize(static_cast<std::size_t>(M));

  std::vector<InteractionRecord> records;
  records.reserve(static_cast<std::size_t>(M * L));
  for (Index s = 0; s < M; ++s) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(s) + 1));
    double gain_lo = cfg.gain_low;
    double gain_hi = cfg.gain_high;
    if (!cfg.archetype_gains.empty()) {
      const auto arch = static_cast<std::size_t>(s) % cfg.archetype_gains.size();
      truth.archetype[static_cast<std::size_t>(s)] = static_cast<int>(arch);
      std::tie(gain_lo, gain_hi) = cfg.archetype_gains[arch];
    }
    const Index min_len = cfg.min_seq_len == 0 ? L : cfg.min_seq_len;
    const Index len = min_len + rng.index(L - min_len + 1);

    Eigen::VectorXd k(C);
    for (Index c = 0; c < C; ++c) k(c) = rng.uniform(cfg.init_low, cfg.init_high);

    for (Index a = 0; a < L; ++a) {
      const auto [r, p] = catalogue[static_cast<std::size_t>(rng.index(static_cast<Index>(catalogue.size())))];
      const auto& q = truth.Q[static_cast<std::size_t>(r)].col(p);
      if (a > 0) {
        const double alpha = rng.uniform();
        if (alpha >= cfg.forget_threshold) {
          k += rng.uniform(gain_lo, gain_hi) * q;
        } else {
          for (Index c = 0; c < C; ++c) {
            k(c) = std::max(0.0, k(c) - rng.uniform(0.0, cfg.forget_magnitude));
          }
        }
      }
      k_slices[static_cast<std::size_t>(a)].row(s) = k.transpose();
      if (a >= len) continue;
      double x = 1.0;
      if (graded(r)) {
        x = k.dot(q);
        if (cfg.clip_scores) x = std::min(x, 1.0);
      }
      records.push_back({s, a, r, p, x});
    }
  }

  if (!cfg.clip_scores) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& rec : records) {
      if (!graded(rec.view)) continue;
      lo = std::min(lo, rec.value);
      hi = std::max(hi, rec.value);
    }
    if (std::isfinite(lo) && hi > lo) {
      truth.score_offset = lo;
      truth.score_scale = hi - lo;
      for (auto& rec : records) {
        if (graded(rec.view)) rec.value = std::clamp((rec.value - lo) / (hi - lo), 0.0, 1.0);
      }
    }
  }
  truth.knowledge = KnowledgeTensor(std::move(k_slices));

  std::vector<ViewSpec> views;
  for (int r = 0; r < num_views; ++r) {
    ViewSpec v;
    v.id = r;
    v.name = cfg.view_names[static_cast<std::size_t>(r)];
    v.graded = graded(r);
    v.num_materials = cfg.materials_per_view[static_cast<std::size_t>(r)];
    const std::string prefix = v.name.substr(0, 1);
    for (Index p = 0; p < v.num_materials; ++p) v.material_ids.push_back(padded(prefix, p, v.num_materials));
    views.push_back(std::move(v));
  }
  std::vector<std::string> students;
  for (Index s = 0; s < M; ++s) students.push_back(padded("s", s, M));

  return {Dataset(std::move(views), std::move(students), std::move(records)), std::move(truth)};
}

SynthConfig synthetic_ng_config() { return SynthConfig{}; }

SynthConfig synthetic_g_config() {
  SynthConfig cfg;
  cfg.view2_graded = true;
  cfg.view_names = {"quiz", "assignment"};
  return cfg;
}

SynthConfig synthetic_ng2_config() {
  SynthConfig cfg;
  cfg.clip_scores = false;
  return cfg;
}

std::string truth_to_json(const SynthTruth& truth) {
  nlohmann::ordered_json j;
  j["format"] = "mvkm-synth-truth";
  j["version"] = 1;
  auto qs = nlohmann::ordered_json::array();
  for (const auto& Qr : truth.Q) {
    std::vector<double> flat;
    for (Index c = 0; c < Qr.rows(); ++c) {
      for (Index p = 0; p < Qr.cols(); ++p) flat.push_back(Qr(c, p));
    }
    qs.push_back({{"rows", Qr.rows()}, {"cols", Qr.cols()}, {"data", flat}});
  }
  j["Q"] = std::move(qs);
  const auto& K = truth.knowledge;
  std::vector<double> kflat;
  kflat.reserve(static_cast<std::size_t>(K.num_students() * K.num_concepts() * K.num_attempts()));
  for (Index s = 0; s < K.num_students(); ++s) {
    for (Index c = 0; c < K.num_concepts(); ++c) {
      for (Index a = 0; a < K.num_attempts(); ++a) kflat.push_back(K(s, c, a));
    }
  }
  j["K"] = {{"shape", {K.num_students(), K.num_concepts(), K.num_attempts()}}, {"data", kflat}};
  j["archetype"] = truth.archetype;
  j["score_offset"] = truth.score_offset;
  j["score_scale"] = truth.score_scale;
  return j.dump(1) + "\n";
}

}  // namespace mvkm
