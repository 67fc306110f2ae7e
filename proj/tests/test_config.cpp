#include <gtest/gtest.h>

#include "mvkm/config.hpp"
#include "mvkm/errors.hpp"

using namespace mvkm;

TEST(HyperJson, RoundTripsEveryField) {
  HyperParams hp;
  hp.latent_dim = 5;
  hp.omega = 0.05;
  hp.gamma = {1.0, 0.3, 0.2};
  hp.markov_step = 3;
  hp.early_stop_window = 0;
  hp.shared_attempt_bias = true;
  hp.seed = 77;
  EXPECT_EQ(hyper_from_json(to_json(hp)), hp);
}

TEST(HyperJson, OverridesOnlyPresentKeys) {
  HyperParams base;
  base.eta = 0.01;
  const auto hp = hyper_from_json(Json::parse(R"({"omega": 0.5})"), base);
  EXPECT_EQ(hp.omega, 0.5);
  EXPECT_EQ(hp.eta, 0.01);
}

TEST(HyperJson, RejectsUnknownKeysAndWrongTypes) {
  EXPECT_THROW(hyper_from_json(Json::parse(R"({"omgea": 0.5})")), ConfigError);
  EXPECT_THROW(hyper_from_json(Json::parse(R"({"omega": "high"})")), ConfigError);
  EXPECT_THROW(hyper_from_json(Json::parse(R"({"epochs": 2.5})")), ConfigError);
  EXPECT_THROW(hyper_from_json(Json::parse(R"({"seed": -1})")), ConfigError);
  try {
    hyper_from_json(Json::parse(R"({"gamma": [1, "x"]})"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

TEST(SynthJson, PresetsAndOverrides) {
  const auto cfg = synth_from_json(Json::parse(R"({"preset": "synthetic_g", "num_students": 12})"));
  EXPECT_TRUE(cfg.view2_graded);
  EXPECT_EQ(cfg.num_students, 12);
  EXPECT_FALSE(synth_from_json(Json::parse(R"({"preset": "synthetic_ng2"})")).clip_scores);
  EXPECT_THROW(synth_from_json(Json::parse(R"({"preset": "other"})")), ConfigError);

  SynthConfig s;
  s.archetype_gains = {{0.1, 0.2}};
  s.concept_purity = 0.4;
  const auto back = synth_from_json(to_json(s));
  EXPECT_EQ(back.archetype_gains, s.archetype_gains);
  EXPECT_EQ(back.concept_purity, 0.4);
}

TEST(GridJson, ListsBecomeDimensions) {
  HyperParams base;
  base.eta = 0.02;
  const auto grid = grid_from_json(Json::parse(R"({"omega": [0, 0.1], "gamma": [[1, 0.1], [1, 1]]})"), base);
  EXPECT_EQ(grid.expand().size(), 4u);
  EXPECT_EQ(grid.base.eta, 0.02);
  EXPECT_THROW(grid_from_json(Json::parse(R"({"omega": 0.1})"), base), ConfigError);
  EXPECT_THROW(grid_from_json(Json::parse(R"({"seed": [1, 2]})"), base), ConfigError);
}

TEST(RunConfig, ParsesSectionsAndValidates) {
  const auto cfg = parse_run_config(R"({
    "seed": 9,
    "data": {"views": [{"name": "quiz", "graded": true, "max_score": 10}]},
    "synth": {"num_students": 50},
    "train": {"omega": 0.1, "ablation": "no-penalty"},
    "eval": {"folds": 3, "methods": ["full", "avg"]},
    "analysis": {"student_clusters": 2, "bias_correlation": true}
  })");
  EXPECT_EQ(cfg.seed, 9u);
  ASSERT_EQ(cfg.data.views.size(), 1u);
  EXPECT_EQ(cfg.data.views[0].max_score, 10.0);
  EXPECT_EQ(cfg.synth.num_students, 50);
  EXPECT_EQ(cfg.train.omega, 0.1);
  EXPECT_EQ(cfg.ablation, Ablation::no_penalty);
  EXPECT_EQ(cfg.eval.folds, 3);
  EXPECT_EQ(cfg.analysis.student_clusters, 2);
}

TEST(RunConfig, RejectsBadInput) {
  EXPECT_THROW(parse_run_config("{"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"trian": {}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"seed": 3}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"synth": {"seed": 3}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"eval": {"folds": 1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"eval": {"methods": ["best"]}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"ablation": "half"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"train": {"eta": -1}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"synth": {"forget_threshold": 2}})"), ConfigError);
  EXPECT_THROW(parse_run_config("[]"), ConfigError);
}

TEST(RunConfig, EchoParsesBackToTheSameConfig) {
  auto cfg = parse_run_config(R"({"seed": 4, "train": {"omega": 0.3}, "grid": {"eta": [0.1, 0.01]}})");
  cfg.synth.seed = 4;
  cfg.train.seed = 4;
  const auto echo = to_json(cfg);
  const auto back = run_config_from_json(echo);
  EXPECT_EQ(to_json(back).dump(), echo.dump());
  EXPECT_EQ(back.train.omega, 0.3);
}

TEST(Fnv1a, MatchesReferenceVectors) {
  EXPECT_EQ(hex64(fnv1a("")), "cbf29ce484222325");
  EXPECT_EQ(hex64(fnv1a("a")), "af63dc4c8601ec8c");
  EXPECT_EQ(hex64(fnv1a("foobar")), "85944171f73967e8");
}
