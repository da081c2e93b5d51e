#include <gtest/gtest.h>

#include "safrlm/error.hpp"
#include "safrlm/gradcheck.hpp"
#include "safrlm/train.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace safrlm;

TEST(Model, CreationIsSeeded) {
  const auto mc = ModelConfig::from_run_config(fixtures::toy_config());
  const auto a = Model<float>::create(mc, 3);
  const auto b = Model<float>::create(mc, 3);
  const auto c = Model<float>::create(mc, 4);
  ASSERT_EQ(a.params().size(), b.params().size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params().entries()[i].value, b.params().entries()[i].value);
    any_diff = any_diff || a.params().entries()[i].value != c.params().entries()[i].value;
  }
  EXPECT_TRUE(any_diff);
}

TEST(Model, GroupOrderCoversEveryModule) {
  const auto model = Model<float>::create(ModelConfig::from_run_config(fixtures::toy_config()), 1);
  const auto groups = model.params().groups();
  ASSERT_FALSE(groups.empty());
  EXPECT_EQ(groups.front(), "align.text.conv");
  EXPECT_EQ(groups.back(), "heads.global");
  EXPECT_NE(std::find(groups.begin(), groups.end(), "fusion.weights"), groups.end());
  EXPECT_NE(std::find(groups.begin(), groups.end(), "xadjust.t_prime_a.second.block0"), groups.end());
}

TEST(Model, CheckpointRoundTrip) {
  const auto dir = oracle::scratch_dir("checkpoint");
  const auto model = Model<float>::create(ModelConfig::from_run_config(fixtures::toy_config()), 9);
  model.save(dir / "m.json");
  const auto back = Model<float>::load(dir / "m.json");
  EXPECT_EQ(back.config().to_json(), model.config().to_json());
  for (std::size_t i = 0; i < model.params().size(); ++i)
    EXPECT_EQ(back.params().entries()[i].value, model.params().entries()[i].value);
  const auto rec = generate_synthetic(fixtures::toy_spec(1, 5, 0.0)).records.front();
  EXPECT_EQ(back.predict(rec).global, model.predict(rec).global);
}

TEST(Model, LoadRejectsMismatchedCheckpoint) {
  const auto dir = oracle::scratch_dir("checkpoint_bad");
  auto j = Model<float>::create(ModelConfig::from_run_config(fixtures::toy_config()), 9).checkpoint_json();
  j["params"].erase(j["params"].begin());
  EXPECT_THROW(Model<float>::from_checkpoint(j), Error);
  EXPECT_THROW(Model<float>::load(dir / "missing.json"), Error);
}

TEST(Model, PredictionIsFiniteAndDeterministic) {
  const auto model = Model<float>::create(ModelConfig::from_run_config(fixtures::toy_config()), 2);
  for (const auto& r : generate_synthetic(fixtures::toy_spec(5, 1, 0.0)).records) {
    const auto p = model.predict(r);
    EXPECT_TRUE(std::isfinite(p.global));
    EXPECT_EQ(p.global, model.predict(r).global);
  }
}

TEST(Train, SameSeedSameHistory) {
  const auto cfg = fixtures::toy_run(oracle::scratch_dir("train_det"), 16, 6, 6, 0.1);
  const auto splits = load_splits(cfg);
  const auto a = train(splits.train, splits.validation, cfg);
  const auto b = train(splits.train, splits.validation, cfg);
  EXPECT_EQ(a.history.train_loss, b.history.train_loss);
  auto other = cfg;
  other.train.seed = 2;
  EXPECT_NE(train(splits.train, splits.validation, other).history.train_loss, a.history.train_loss);
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("train_lr0"), 10, 4, 4, 0.1);
  cfg.train.learning_rate = 0.0;
  cfg.xadjust.dropout = 0.3;
  const auto splits = load_splits(cfg);
  const auto r = train(splits.train, splits.validation, cfg);
  const auto init = Model<float>::create(ModelConfig::from_run_config(cfg), cfg.train.seed);
  for (std::size_t i = 0; i < init.params().size(); ++i)
    EXPECT_EQ(r.last.params().entries()[i].value, init.params().entries()[i].value);
}

TEST(Train, HistoryShapeAndBestSelection) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("train_hist"), 12, 5, 5, 0.1);
  cfg.train.epochs = 3;
  const auto splits = load_splits(cfg);
  const auto r = train(splits.train, splits.validation, cfg);
  ASSERT_EQ(r.history.train_loss.size(), 3u);
  ASSERT_EQ(r.history.validation.size(), 3u);
  double best = INFINITY;
  for (const auto& v : r.history.validation) best = std::min(best, v.mae);
  EXPECT_EQ(r.history.best_validation_mae, best);
  EXPECT_EQ(r.history.validation[static_cast<std::size_t>(r.history.best_epoch)].mae, best);
  EXPECT_DOUBLE_EQ(evaluate(r.best, splits.validation).mae, best);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_LE(r.history.best_train_loss[i], r.history.best_train_loss[i - 1]);
}

TEST(Train, DimensionMismatchRejected) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("train_dims"), 4, 2, 2, 0.1);
  cfg.data.d_text = 9;
  const auto splits = load_splits(cfg);
  try {
    train(splits.train, splits.validation, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::dimension);
  }
}

TEST(Train, DivergenceNamesEpoch) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("train_div"), 8, 2, 2, 0.1);
  cfg.train.learning_rate = 1e30;
  cfg.train.epochs = 5;
  const auto splits = load_splits(cfg);
  try {
    train(splits.train, splits.validation, cfg);
    FAIL() << "expected divergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::divergence);
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}

TEST(Protocol, MultiSeedAveragesRuns) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("multi_seed"), 8, 4, 4, 0.1);
  cfg.train.epochs = 1;
  cfg.seeds = {3, 4};
  const auto splits = load_splits(cfg);
  const auto report = multi_seed(cfg, splits);
  ASSERT_EQ(report.runs.size(), 2u);
  EXPECT_EQ(report.seeds, (std::vector<std::uint64_t>{3, 4}));
  EXPECT_DOUBLE_EQ(report.mean.mae, (report.runs[0].mae + report.runs[1].mae) / 2);
  EXPECT_DOUBLE_EQ(report.mean.acc2, (report.runs[0].acc2 + report.runs[1].acc2) / 2);
}

TEST(Protocol, BlockCounts) {
  EXPECT_EQ(blocks_per_stage_for(10), 5);
  for (int n = 2; n <= 14; n += 2) EXPECT_EQ(blocks_per_stage_for(n), n / 2);
  for (int n : {0, 1, 3, -2}) EXPECT_THROW(blocks_per_stage_for(n), Error);
}

TEST(Protocol, SweepProducesOneRowPerN) {
  auto cfg = fixtures::toy_run(oracle::scratch_dir("sweep"), 8, 4, 4, 0.1);
  cfg.train.epochs = 1;
  cfg.seeds = {1};
  const auto splits = load_splits(cfg);
  const std::vector<int> ns{2, 4};
  const auto rows = sweep_blocks(cfg, splits, ns);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1].blocks_per_stage, 2);
  const auto csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,acc7,acc2,f1,mae,corr");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const std::vector<int> odd{3};
  EXPECT_THROW(sweep_blocks(cfg, splits, odd), Error);
}

TEST(Gradcheck, TinyConfigPasses) {
  const auto report = gradcheck(tiny_gradcheck_config(), 1e-4);
  EXPECT_TRUE(report.passed);
  EXPECT_GT(report.min_label_gap, 1e-3);
  EXPECT_EQ(report.groups.size(), 18u);
}

TEST(Gradcheck, ZeroToleranceFails) { EXPECT_FALSE(gradcheck(tiny_gradcheck_config(), 0.0).passed); }

TEST(Gradcheck, OtherSeedsPass) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto report = gradcheck(tiny_gradcheck_config(), 1e-4, seed);
    for (const auto& g : report.groups) EXPECT_TRUE(g.passed) << g.group << " " << g.max_relative_error;
  }
}
