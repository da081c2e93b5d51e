#pragma once

// Self-attention transformers over the adjusted fusion streams, local and
// global regressors, and the joint L1 objective.

#include <array>
#include <string>
#include <vector>

#include "safrlm/xadjust.hpp"

namespace safrlm {

class Rng;

/// Position embedding + N_self blocks with source = target.
struct SelfAttnTransformer {
  LayerNormLayer embed;
  std::vector<CrossmodalBlock> blocks;
};

/// affine(in -> hidden) -> softplus -> dropout -> affine(hidden -> 1)
struct Classifier {
  ParamId w_hidden, b_hidden, w_out, b_out;
  double dropout = 0.3;
};

struct HeadsConfig {
  int self_blocks = 3;
  int hidden = 200;
  double dropout = 0.3;
};

struct HeadsModule {
  SelfAttnTransformer self_ta_prime;
  SelfAttnTransformer self_t_prime_a;
  Classifier local_ta_prime;
  Classifier local_t_prime_a;
  Classifier global;
};

template <typename T>
SelfAttnTransformer make_self_attn_transformer(ParamStore<T>& store, const std::string& name, int blocks,
                                               const BlockConfig& block_config, Rng& rng);

template <typename T>
Classifier make_classifier(ParamStore<T>& store, const std::string& name, int in, int hidden, double dropout,
                           Rng& rng);

template <typename T>
HeadsModule make_heads_module(ParamStore<T>& store, const HeadsConfig& config, const BlockConfig& block_config,
                              Rng& rng);

template <typename T>
ag::Var self_attn_transform(Graph<T>& g, ag::Var seq, const SelfAttnTransformer& sat,
                            const std::string& site = "self");

/// 1 x in row to 1 x 1.
template <typename T>
ag::Var classify(Graph<T>& g, ag::Var row, const Classifier& c);

template <typename V>
struct PredictionTriple {
  V ta_prime;    // local, mean-pooled X_TA' stream
  V t_prime_a;   // local, mean-pooled X_T'A stream
  V global;      // concatenated final steps of both self-attention outputs
};

template <typename T>
PredictionTriple<ag::Var> predict(Graph<T>& g, ag::Var adjusted_ta_prime, ag::Var adjusted_t_prime_a,
                                  const HeadsModule& heads);

/// Per-term weights for the three L1 terms; all 1 is the unweighted objective.
using LossWeights = std::array<double, 3>;
inline constexpr LossWeights kUnitLossWeights{1.0, 1.0, 1.0};

/// |y_TA' - label| + |y_T'A - label| + |y_TA - label| as a 1 x 1 var.
template <typename T>
ag::Var joint_loss(Graph<T>& g, const PredictionTriple<ag::Var>& preds, double label,
                   const LossWeights& weights = kUnitLossWeights);

double joint_loss(const PredictionTriple<double>& preds, double label, const LossWeights& weights = kUnitLossWeights);

/// Mean of per-sample joint losses.
double joint_loss(const std::vector<PredictionTriple<double>>& preds, const std::vector<double>& labels,
                  const LossWeights& weights = kUnitLossWeights);

// Matrix-level conveniences.
MatD self_attn_transform(const MatD& seq, const SelfAttnTransformer& sat, const ParamStore<double>& params);
PredictionTriple<double> predict(const MatD& adjusted_ta_prime, const MatD& adjusted_t_prime_a,
                                 const HeadsModule& heads, const ParamStore<double>& params);

}  // namespace safrlm
