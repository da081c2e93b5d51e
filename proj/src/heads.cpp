#include "safrlm/heads.hpp"

#include <cmath>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

template <typename T>
SelfAttnTransformer make_self_attn_transformer(ParamStore<T>& store, const std::string& name, int blocks,
                                               const BlockConfig& block_config, Rng& rng) {
  if (blocks < 1) throw Error(ErrorCode::configuration, "heads.self_blocks must be >= 1");
  const std::string base = "heads.self." + name;
  SelfAttnTransformer s;
  s.embed = make_layer_norm(store, base + ".embed", base + ".embedding", block_config.width);
  for (int i = 0; i < blocks; ++i) {
    const std::string p = base + ".block" + std::to_string(i);
    s.blocks.push_back(make_crossmodal_block(store, p, p, block_config, rng));
  }
  return s;
}

template <typename T>
Classifier make_classifier(ParamStore<T>& store, const std::string& name, int in, int hidden, double dropout,
                           Rng& rng) {
  if (hidden < 1) throw Error(ErrorCode::configuration, "heads.hidden must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorCode::configuration, "heads.dropout must lie in [0, 1)");
  const std::string base = "heads." + name;
  Classifier c;
  c.dropout = dropout;
  c.w_hidden = store.add(base + ".hidden.weight", base, uniform_fan_in<T>(in, hidden, in, rng));
  c.b_hidden = store.add(base + ".hidden.bias", base, uniform_fan_in<T>(1, hidden, in, rng));
  c.w_out = store.add(base + ".out.weight", base, uniform_fan_in<T>(hidden, 1, hidden, rng));
  c.b_out = store.add(base + ".out.bias", base, uniform_fan_in<T>(1, 1, hidden, rng));
  return c;
}

template <typename T>
HeadsModule make_heads_module(ParamStore<T>& store, const HeadsConfig& config, const BlockConfig& block_config,
                              Rng& rng) {
  const int d = block_config.width;
  HeadsModule h;
  h.self_ta_prime = make_self_attn_transformer(store, "ta_prime", config.self_blocks, block_config, rng);
  h.self_t_prime_a = make_self_attn_transformer(store, "t_prime_a", config.self_blocks, block_config, rng);
  h.local_ta_prime = make_classifier(store, "local.ta_prime", d, config.hidden, config.dropout, rng);
  h.local_t_prime_a = make_classifier(store, "local.t_prime_a", d, config.hidden, config.dropout, rng);
  h.global = make_classifier(store, "global", 2 * d, config.hidden, config.dropout, rng);
  return h;
}

template <typename T>
ag::Var self_attn_transform(Graph<T>& g, ag::Var seq, const SelfAttnTransformer& sat, const std::string& site) {
  ag::Var cur = embed(g, seq, sat.embed);
  for (std::size_t i = 0; i < sat.blocks.size(); ++i) {
    cur = crossmodal_block(g, cur, cur, sat.blocks[i], site + ".block" + std::to_string(i));
  }
  return cur;
}

template <typename T>
ag::Var classify(Graph<T>& g, ag::Var row, const Classifier& c) {
  auto& t = g.tape();
  ag::Var h = ag::softplus(t, ag::add_row(t, ag::matmul(t, row, g.param(c.w_hidden)), g.param(c.b_hidden)));
  if (g.training() && c.dropout > 0.0) h = ag::dropout(t, h, c.dropout, g.rng());
  return ag::add_row(t, ag::matmul(t, h, g.param(c.w_out)), g.param(c.b_out));
}

template <typename T>
PredictionTriple<ag::Var> predict(Graph<T>& g, ag::Var adjusted_ta_prime, ag::Var adjusted_t_prime_a,
                                  const HeadsModule& heads) {
  const auto& a = g.value(adjusted_ta_prime);
  const auto& b = g.value(adjusted_t_prime_a);
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.rows() < 1) {
    throw Error(ErrorCode::shape, "predict: both adjusted streams must share a non-empty (l x d) shape");
  }
  const Eigen::Index last = a.rows() - 1;
  auto& t = g.tape();
  PredictionTriple<ag::Var> p;
  p.ta_prime = classify(g, ag::mean_rows(t, adjusted_ta_prime), heads.local_ta_prime);
  p.t_prime_a = classify(g, ag::mean_rows(t, adjusted_t_prime_a), heads.local_t_prime_a);
  const ag::Var s1 = self_attn_transform(g, adjusted_ta_prime, heads.self_ta_prime, "heads.self.ta_prime");
  const ag::Var s2 = self_attn_transform(g, adjusted_t_prime_a, heads.self_t_prime_a, "heads.self.t_prime_a");
  const std::array<ag::Var, 2> summary{ag::slice_rows(t, s1, last, 1), ag::slice_rows(t, s2, last, 1)};
  p.global = classify(g, ag::concat_cols<T>(t, summary), heads.global);
  return p;
}

template <typename T>
ag::Var joint_loss(Graph<T>& g, const PredictionTriple<ag::Var>& preds, double label, const LossWeights& weights) {
  auto& t = g.tape();
  const T y = static_cast<T>(label);
  auto term = [&](ag::Var pred, double w) {
    return ag::affine(t, ag::abs(t, ag::affine(t, pred, T(1), -y)), static_cast<T>(w), T(0));
  };
  return ag::add(t, ag::add(t, term(preds.ta_prime, weights[0]), term(preds.t_prime_a, weights[1])),
                 term(preds.global, weights[2]));
}

double joint_loss(const PredictionTriple<double>& preds, double label, const LossWeights& weights) {
  return weights[0] * std::abs(preds.ta_prime - label) + weights[1] * std::abs(preds.t_prime_a - label) +
         weights[2] * std::abs(preds.global - label);
}

double joint_loss(const std::vector<PredictionTriple<double>>& preds, const std::vector<double>& labels,
                  const LossWeights& weights) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw Error(ErrorCode::shape, "joint_loss: predictions and labels must be non-empty and of equal length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) total += joint_loss(preds[i], labels[i], weights);
  return total / static_cast<double>(preds.size());
}

MatD self_attn_transform(const MatD& seq, const SelfAttnTransformer& sat, const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(self_attn_transform(g, g.input(seq), sat));
}

PredictionTriple<double> predict(const MatD& adjusted_ta_prime, const MatD& adjusted_t_prime_a,
                                 const HeadsModule& heads, const ParamStore<double>& params) {
  Graph<double> g(params);
  const auto p = predict(g, g.input(adjusted_ta_prime), g.input(adjusted_t_prime_a), heads);
  return {g.value(p.ta_prime)(0, 0), g.value(p.t_prime_a)(0, 0), g.value(p.global)(0, 0)};
}

#define SAFRLM_INSTANTIATE_HEADS(T)                                                                              \
  template SelfAttnTransformer make_self_attn_transformer<T>(ParamStore<T>&, const std::string&, int,            \
                                                             const BlockConfig&, Rng&);                          \
  template Classifier make_classifier<T>(ParamStore<T>&, const std::string&, int, int, double, Rng&);            \
  template HeadsModule make_heads_module<T>(ParamStore<T>&, const HeadsConfig&, const BlockConfig&, Rng&);       \
  template ag::Var self_attn_transform<T>(Graph<T>&, ag::Var, const SelfAttnTransformer&, const std::string&);  \
  template ag::Var classify<T>(Graph<T>&, ag::Var, const Classifier&);                                          \
  template PredictionTriple<ag::Var> predict<T>(Graph<T>&, ag::Var, ag::Var, const HeadsModule&);               \
  template ag::Var joint_loss<T>(Graph<T>&, const PredictionTriple<ag::Var>&, double, const LossWeights&);

SAFRLM_INSTANTIATE_HEADS(float)
SAFRLM_INSTANTIATE_HEADS(double)

}  // namespace safrlm
