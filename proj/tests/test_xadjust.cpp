#include <gtest/gtest.h>

#include <cmath>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"
#include "safrlm/xadjust.hpp"
#include "support/oracles.hpp"

using namespace safrlm;

TEST(PositionalEncoding, FirstRowAlternatesZeroOne) {
  for (int d : {1, 2, 7, 50}) {
    const MatD pe = positional_encoding<double>(3, d);
    for (int c = 0; c < d; ++c) EXPECT_EQ(pe(0, c), c % 2 == 0 ? 0.0 : 1.0);
  }
}

TEST(PositionalEncoding, KnownValuesAndOracle) {
  const MatD pe = positional_encoding<double>(4, 6);
  EXPECT_NEAR(pe(1, 0), 0.841471, 1e-6);
  EXPECT_NEAR(pe(1, 1), 0.540302, 1e-6);
  EXPECT_LE(oracle::max_abs_diff(pe, oracle::positional_encoding(4, 6)), 1e-15);
  EXPECT_LE(oracle::max_abs_diff(positional_encoding<double>(9, 11), oracle::positional_encoding(9, 11)), 1e-15);
}

TEST(Embed, ZeroInputFixture) {
  ParamStore<double> store;
  const auto ln = make_layer_norm(store, "e", "e", 4);
  const MatD out = embed(MatD::Zero(3, 4), ln, store);
  MatD expected(3, 4);
  expected << -0.9999800005999799, 0.9999800005999799, -0.9999800005999799, 0.9999800005999799,  //
      0.6451791580061406, -0.15266757014469454, -1.5575284412386703, 1.0650168533772242,           //
      0.8888778782095842, -1.3296244349835489, -0.5996127441369062, 1.0403593009108707;
  EXPECT_LE(oracle::max_abs_diff(out, expected), 1e-12);
}

TEST(BlockConfig, HeadsMustDivideWidth) {
  BlockConfig c;
  c.width = 8;
  c.heads = 3;
  try {
    c.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
  c.heads = 4;
  EXPECT_NO_THROW(c.validate());
}

TEST(CrossmodalBlock, MatchesLoopOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 100; ++trial) {
    BlockConfig cfg;
    cfg.heads = static_cast<int>(rng.uniform_int(1, 3));
    cfg.width = cfg.heads * static_cast<int>(rng.uniform_int(1, 3));
    cfg.ff_width = static_cast<int>(rng.uniform_int(1, 6));
    cfg.scale = trial % 2 == 0 ? ScaleMode::per_head : ScaleMode::full_dim;
    ParamStore<double> store;
    const auto block = make_crossmodal_block(store, "b", "b", cfg, rng);
    // Random norm parameters so gain/offset handling is exercised too.
    for (auto& e : store.entries()) e.value = oracle::random_matrix(rng, e.value.rows(), e.value.cols(), 0.7);
    const MatD target = oracle::random_matrix(rng, rng.uniform_int(1, 6), cfg.width);
    const MatD source = oracle::random_matrix(rng, rng.uniform_int(1, 6), cfg.width);
    const MatD got = crossmodal_block(target, source, block, store);
    EXPECT_LE(oracle::max_abs_diff(got, oracle::crossmodal_block(target, source, block, store)), 1e-10)
        << "trial " << trial;
  }
}

TEST(CrossmodalBlock, HeadWeightsAreTraced) {
  Rng rng(2);
  BlockConfig cfg{6, 3, 5, 0.3, ScaleMode::per_head};
  ParamStore<double> store;
  const auto block = make_crossmodal_block(store, "b", "b", cfg, rng);
  Graph<double> g(store);
  std::vector<std::string> sites;
  g.set_trace([&](const std::string& site, const MatD& w) {
    sites.push_back(site);
    EXPECT_EQ(w.rows(), 2);
    EXPECT_EQ(w.cols(), 5);
  });
  crossmodal_block(g, g.input(oracle::random_matrix(rng, 2, 6)), g.input(oracle::random_matrix(rng, 5, 6)), block,
                   "x");
  EXPECT_EQ(sites, (std::vector<std::string>{"x.head0", "x.head1", "x.head2"}));
}

TEST(CrossmodalBlock, DropoutOnlyWhenTraining) {
  Rng rng(2);
  BlockConfig cfg{4, 2, 8, 0.5, ScaleMode::per_head};
  ParamStore<double> store;
  const auto block = make_crossmodal_block(store, "b", "b", cfg, rng);
  const MatD x = oracle::random_matrix(rng, 3, 4);
  const MatD eval = crossmodal_block(x, x, block, store);
  Graph<double> g(store);
  Rng drop(1);
  g.set_training(&drop);
  const MatD train = g.value(crossmodal_block(g, g.input(x), g.input(x), block));
  EXPECT_GT(oracle::max_abs_diff(eval, train), 1e-6);
}

TEST(SelfAdjust, PreservesShape) {
  Rng rng(9);
  for (int n : {1, 2, 3}) {
    BlockConfig cfg{6, 2, 7, 0.3, ScaleMode::per_head};
    ParamStore<double> store;
    const auto stack = make_adjust_stack(store, "s", n, cfg, rng);
    EXPECT_EQ(stack.first_stage.size(), static_cast<std::size_t>(n));
    EXPECT_EQ(stack.second_stage.size(), static_cast<std::size_t>(n));
    const MatD f = oracle::random_matrix(rng, 5, 6);
    const MatD out = self_adjust(f, oracle::random_matrix(rng, 5, 6), oracle::random_matrix(rng, 5, 6), stack, store);
    EXPECT_EQ(out.rows(), 5);
    EXPECT_EQ(out.cols(), 6);
  }
}

TEST(SelfAdjust, StagesUseTheirOwnKeys) {
  Rng rng(9);
  BlockConfig cfg{4, 2, 5, 0.3, ScaleMode::per_head};
  ParamStore<double> store;
  const auto stack = make_adjust_stack(store, "s", 1, cfg, rng);
  const MatD f = oracle::random_matrix(rng, 3, 4);
  const MatD a = oracle::random_matrix(rng, 3, 4);
  const MatD b = oracle::random_matrix(rng, 3, 4);
  const auto ln = [&](const MatD& x, const LayerNormLayer& l) {
    return oracle::layer_norm(x + oracle::positional_encoding(3, 4), store.value(l.gain), store.value(l.offset),
                              kLayerNormEps);
  };
  MatD cur = oracle::crossmodal_block(ln(f, stack.embed_fusion), ln(a, stack.embed_first), stack.first_stage[0], store);
  cur = oracle::crossmodal_block(cur, ln(b, stack.embed_second), stack.second_stage[0], store);
  EXPECT_LE(oracle::max_abs_diff(self_adjust(f, a, b, stack, store), cur), 1e-10);
}

TEST(SelfAdjust, GroupsAreReportedPerBlock) {
  Rng rng(9);
  ParamStore<double> store;
  make_adjust_stack(store, "ta_prime", 2, BlockConfig{4, 2, 5, 0.3, ScaleMode::per_head}, rng);
  const std::vector<std::string> expected{"xadjust.ta_prime.embedding", "xadjust.ta_prime.first.block0",
                                          "xadjust.ta_prime.first.block1", "xadjust.ta_prime.second.block0",
                                          "xadjust.ta_prime.second.block1"};
  EXPECT_EQ(store.groups(), expected);
}

TEST(SelfAdjust, ShapeMismatchRejected) {
  Rng rng(9);
  ParamStore<double> store;
  const auto stack = make_adjust_stack(store, "s", 1, BlockConfig{4, 2, 5, 0.3, ScaleMode::per_head}, rng);
  try {
    self_adjust(MatD::Zero(3, 4), MatD::Zero(2, 4), MatD::Zero(3, 4), stack, store);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::shape);
  }
}

TEST(PositionalEncoding, EntriesBounded) {
  const MatD pe = positional_encoding<double>(4, 6);
  EXPECT_EQ(pe.rows(), 4);
  EXPECT_EQ(pe.cols(), 6);
  EXPECT_LE(pe.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Embed, RowsAreStandardized) {
  Rng rng(3);
  ParamStore<double> store;
  const auto ln = make_layer_norm(store, "e", "e", 8);
  const MatD x = oracle::random_matrix(rng, 5, 8, 4.0);
  const MatD out = embed(x, ln, store);
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double mean = out.row(i).mean();
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR((out.row(i).array() - mean).square().mean(), 1.0, 1e-4);
  }
  EXPECT_EQ(out, embed(x, ln, store));
}

TEST(CrossmodalBlock, SingleSourceRowIsPointMass) {
  Rng rng(6);
  ParamStore<double> store;
  const auto block = make_crossmodal_block(store, "b", "b", BlockConfig{8, 2, 5, 0.3, ScaleMode::per_head}, rng);
  Graph<double> g(store);
  int maps = 0;
  g.set_trace([&](const std::string&, const MatD& w) {
    ++maps;
    EXPECT_EQ(w.cols(), 1);
    EXPECT_TRUE(w.isOnes(0.0));
  });
  const MatD out =
      g.value(crossmodal_block(g, g.input(oracle::random_matrix(rng, 4, 8)), g.input(oracle::random_matrix(rng, 1, 8)),
                               block));
  EXPECT_EQ(maps, 2);
  EXPECT_EQ(out.rows(), 4);
  EXPECT_EQ(out.cols(), 8);
}

TEST(CrossmodalBlock, IdenticalKeysGiveUniformAttention) {
  Rng rng(6);
  ParamStore<double> store;
  const auto block = make_crossmodal_block(store, "b", "b", BlockConfig{8, 2, 5, 0.3, ScaleMode::per_head}, rng);
  MatD source(5, 8);
  const MatD row = oracle::random_matrix(rng, 1, 8);
  for (Eigen::Index i = 0; i < 5; ++i) source.row(i) = row;
  Graph<double> g(store);
  g.set_trace([&](const std::string&, const MatD& w) {
    EXPECT_LE((w.array() - 0.2).abs().maxCoeff(), 1e-12);
  });
  crossmodal_block(g, g.input(oracle::random_matrix(rng, 3, 8)), g.input(source), block);
}

TEST(SelfAdjust, SwappingKeySourcesChangesOutput) {
  Rng rng(12);
  ParamStore<double> store;
  const auto stack = make_adjust_stack(store, "s", 1, BlockConfig{8, 2, 5, 0.3, ScaleMode::per_head}, rng);
  const MatD f = oracle::random_matrix(rng, 4, 8);
  const MatD a = oracle::random_matrix(rng, 4, 8);
  const MatD b = oracle::random_matrix(rng, 4, 8);
  EXPECT_GT(oracle::max_abs_diff(self_adjust(f, a, b, stack, store), self_adjust(f, b, a, stack, store)), 1e-6);
}
