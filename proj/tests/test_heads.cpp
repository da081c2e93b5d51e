#include <gtest/gtest.h>

#include <cmath>

#include "safrlm/heads.hpp"
#include "safrlm/rng.hpp"
#include "support/oracles.hpp"

using namespace safrlm;

namespace {

struct Tiny {
  ParamStore<double> store;
  HeadsModule heads;
  BlockConfig block{2, 1, 3, 0.3, ScaleMode::per_head};

  explicit Tiny(std::uint64_t seed, int self_blocks = 1) {
    Rng rng(seed);
    heads = make_heads_module(store, HeadsConfig{self_blocks, 4, 0.3}, block, rng);
    for (auto& e : store.entries()) e.value = oracle::random_matrix(rng, e.value.rows(), e.value.cols(), 0.8);
  }
};

MatD self_attn_oracle(const MatD& x, const SelfAttnTransformer& sat, const ParamStore<double>& p) {
  MatD cur = oracle::layer_norm(x + oracle::positional_encoding(static_cast<int>(x.rows()), static_cast<int>(x.cols())),
                                p.value(sat.embed.gain), p.value(sat.embed.offset), kLayerNormEps);
  for (const auto& b : sat.blocks) cur = oracle::crossmodal_block(cur, cur, b, p);
  return cur;
}

double classifier_oracle(const MatD& row, const Classifier& c, const ParamStore<double>& p) {
  const MatD& w1 = p.value(c.w_hidden);
  const MatD& b1 = p.value(c.b_hidden);
  const MatD& w2 = p.value(c.w_out);
  double y = p.value(c.b_out)(0, 0);
  for (Eigen::Index h = 0; h < w1.cols(); ++h) {
    double a = b1(0, h);
    for (Eigen::Index i = 0; i < row.cols(); ++i) a += row(0, i) * w1(i, h);
    y += std::log1p(std::exp(a)) * w2(h, 0);
  }
  return y;
}

}  // namespace

TEST(SelfAttn, SingleStepOutputShape) {
  Tiny t(1);
  const MatD out = self_attn_transform(MatD::Constant(1, 2, 0.4), t.heads.self_ta_prime, t.store);
  EXPECT_EQ(out.rows(), 1);
  EXPECT_EQ(out.cols(), 2);
}

TEST(SelfAttn, EqualsBlockCompositionWithSourceAsTarget) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Tiny t(100 + trial, 1 + trial % 3);
    const MatD x = oracle::random_matrix(rng, rng.uniform_int(1, 5), 2);
    const MatD got = self_attn_transform(x, t.heads.self_t_prime_a, t.store);
    EXPECT_LE(oracle::max_abs_diff(got, self_attn_oracle(x, t.heads.self_t_prime_a, t.store)), 1e-10);
    EXPECT_EQ(got, self_attn_transform(x, t.heads.self_t_prime_a, t.store));
  }
}

TEST(Predict, BiasOnlyClassifiers) {
  Tiny t(3);
  for (const Classifier* c : {&t.heads.local_ta_prime, &t.heads.local_t_prime_a, &t.heads.global}) {
    t.store.value(c->w_hidden).setZero();
    t.store.value(c->b_hidden).setZero();
    t.store.value(c->w_out).setZero();
    t.store.value(c->b_out).setZero();
  }
  t.store.value(t.heads.global.b_out).setConstant(1.75);
  Rng rng(1);
  const auto p = predict(oracle::random_matrix(rng, 3, 2), oracle::random_matrix(rng, 3, 2), t.heads, t.store);
  EXPECT_EQ(p.ta_prime, 0.0);
  EXPECT_EQ(p.t_prime_a, 0.0);
  EXPECT_EQ(p.global, 1.75);
}

TEST(Predict, MatchesComposedOracle) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tiny t(200 + trial);
    const MatD a = oracle::random_matrix(rng, 2, 2);
    const MatD b = oracle::random_matrix(rng, 2, 2);
    const auto p = predict(a, b, t.heads, t.store);
    EXPECT_NEAR(p.ta_prime, classifier_oracle(a.colwise().mean(), t.heads.local_ta_prime, t.store), 1e-10);
    EXPECT_NEAR(p.t_prime_a, classifier_oracle(b.colwise().mean(), t.heads.local_t_prime_a, t.store), 1e-10);
    const MatD sa = self_attn_oracle(a, t.heads.self_ta_prime, t.store);
    const MatD sb = self_attn_oracle(b, t.heads.self_t_prime_a, t.store);
    MatD summary(1, 4);
    summary << sa(1, 0), sa(1, 1), sb(1, 0), sb(1, 1);
    EXPECT_NEAR(p.global, classifier_oracle(summary, t.heads.global, t.store), 1e-10);
  }
}

TEST(Predict, ThreeScalarsForAnyLength) {
  Tiny t(3);
  Rng rng(1);
  for (Eigen::Index l : {1, 4, 9}) {
    const auto p = predict(oracle::random_matrix(rng, l, 2), oracle::random_matrix(rng, l, 2), t.heads, t.store);
    EXPECT_TRUE(std::isfinite(p.ta_prime) && std::isfinite(p.t_prime_a) && std::isfinite(p.global));
  }
}

TEST(HeadsModule, GroupNames) {
  Tiny t(3, 2);
  const std::vector<std::string> expected{
      "heads.self.ta_prime.embedding",  "heads.self.ta_prime.block0",  "heads.self.ta_prime.block1",
      "heads.self.t_prime_a.embedding", "heads.self.t_prime_a.block0", "heads.self.t_prime_a.block1",
      "heads.local.ta_prime",           "heads.local.t_prime_a",       "heads.global"};
  EXPECT_EQ(t.store.groups(), expected);
}

TEST(JointLoss, Arithmetic) {
  EXPECT_EQ(joint_loss(PredictionTriple<double>{0.7, 0.7, 0.7}, 0.7), 0.0);
  EXPECT_EQ(joint_loss(PredictionTriple<double>{1, 1, 1}, 0.0), 3.0);
  const std::vector<PredictionTriple<double>> batch{{1, 1, 1}, {0.5, -0.5, 0.0}};
  EXPECT_DOUBLE_EQ(joint_loss(batch, {0.0, 0.0}), 2.0);
  EXPECT_DOUBLE_EQ(joint_loss(PredictionTriple<double>{1, 2, 3}, 0.0, LossWeights{1.0, 0.0, 2.0}), 7.0);
}

TEST(JointLoss, TapeMatchesScalarForm) {
  ParamStore<double> store;
  Graph<double> g(store);
  const PredictionTriple<ag::Var> p{g.input(MatD::Constant(1, 1, 0.3)), g.input(MatD::Constant(1, 1, -1.2)),
                                    g.input(MatD::Constant(1, 1, 2.0))};
  EXPECT_DOUBLE_EQ(g.value(joint_loss(g, p, 0.5))(0, 0),
                   joint_loss(PredictionTriple<double>{0.3, -1.2, 2.0}, 0.5));
}
