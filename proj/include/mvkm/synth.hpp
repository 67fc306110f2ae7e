#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "mvkm/data.hpp"
#include "mvkm/model.hpp"

namespace mvkm {

/// Parameters of the synthetic learner simulation.
///
/// Each attempt a student either learns from the material just attempted
/// (knowledge += beta * q_material) or, with probability
/// `forget_threshold`, forgets up to `forget_magnitude` in every concept.
/// Observed scores are knowledge . q_material.
struct SynthConfig {
  Index num_students = 1000;
  std::vector<Index> materials_per_view{10, 15};
  Index num_concepts = 3;
  Index seq_len = 20;
  /// Sequence lengths are uniform on [min_seq_len, seq_len]; 0 means seq_len.
  Index min_seq_len = 0;
  double forget_threshold = 0.13;
  double gain_low = 0.05;
  double gain_high = 0.3;
  double forget_magnitude = 0.1;
  double init_low = 0.0;
  double init_high = 0.4;
  bool clip_scores = true;
  bool view2_graded = false;
  std::vector<std::string> view_names{"quiz", "discussion"};
  /// Planted learner archetypes as (gain_low, gain_high) pairs; student s
  /// belongs to archetype s % size. Empty uses the global gain bounds.
  std::vector<std::pair<double, double>> archetype_gains;
  /// Every material of view r > 0 copies the concept column of view-0
  /// material (index mod P[0]).
  bool twin_materials = false;
  /// Share of each drawn concept column placed on concept (material index
  /// mod C); 0 keeps plain normalized uniforms.
  double concept_purity = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SynthTruth {
  std::vector<Eigen::MatrixXd> Q;   // per view, C x P
  KnowledgeTensor knowledge;        // M x C x seq_len
  std::vector<int> archetype;       // per student; empty without archetypes
  /// Graded values were stored as (raw - score_offset) / score_scale.
  double score_offset = 0.0;
  double score_scale = 1.0;
};

struct SynthResult {
  Dataset data;
  SynthTruth truth;
};

SynthResult generate(const SynthConfig& cfg);

/// Synthetic_NG-like defaults (one graded, one non-graded view, clipped).
SynthConfig synthetic_ng_config();
/// Both views graded, clipped.
SynthConfig synthetic_g_config();
/// One non-graded view, unclipped and min-max rescaled.
SynthConfig synthetic_ng2_config();

std::string truth_to_json(const SynthTruth& truth);

}  // namespace mvkm
