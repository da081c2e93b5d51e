#pragma once

// Crossmodal adjustment transformer: sinusoidal position embedding, embedding
// layer norm, crossmodal blocks, and the two-stage adjustment stack.

#include <string>
#include <vector>

#include "safrlm/graph.hpp"

namespace safrlm {

class Rng;

inline constexpr double kLayerNormEps = 1e-5;

/// PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(pos / 10000^(2i/d)).
template <typename T>
Mat<T> positional_encoding(Eigen::Index length, Eigen::Index width);

struct LayerNormLayer {
  ParamId gain;    // 1 x d, init 1
  ParamId offset;  // 1 x d, init 0
};

template <typename T>
LayerNormLayer make_layer_norm(ParamStore<T>& store, const std::string& prefix, const std::string& group, int width);

template <typename T>
ag::Var apply_layer_norm(Graph<T>& g, ag::Var x, const LayerNormLayer& ln);

/// E = LN(PE(l, d) + X).
template <typename T>
ag::Var embed(Graph<T>& g, ag::Var x, const LayerNormLayer& ln);

/// Scaling of attention logits: 1/sqrt(d_head) or 1/sqrt(d).
enum class ScaleMode { per_head, full_dim };

struct BlockConfig {
  int width = 50;
  int heads = 5;
  int ff_width = 200;
  double dropout = 0.3;
  ScaleMode scale = ScaleMode::per_head;

  void validate() const;
};

struct AttentionLayer {
  ParamId w_q, b_q, w_k, b_k, w_v, b_v, w_o, b_o;
};

struct FeedForwardLayer {
  ParamId w_in, b_in, w_out, b_out;
};

/// Q from LN_in(target); K = V from LN_in(source);
/// M = LN_res(MultiHead + target); out = FF(LN_ff(M)) + M.
struct CrossmodalBlock {
  LayerNormLayer ln_in;
  LayerNormLayer ln_res;
  LayerNormLayer ln_ff;
  AttentionLayer attn;
  FeedForwardLayer ff;
  BlockConfig config;
};

template <typename T>
CrossmodalBlock make_crossmodal_block(ParamStore<T>& store, const std::string& prefix, const std::string& group,
                                      const BlockConfig& config, Rng& rng);

/// `site` prefixes the trace names of the per-head attention weights
/// ("<site>.head<k>").
template <typename T>
ag::Var crossmodal_block(Graph<T>& g, ag::Var target, ag::Var source, const CrossmodalBlock& block,
                         const std::string& site = "block");

/// Embeddings for the fusion stream and its two key streams, then N blocks
/// keyed on the first source followed by N blocks keyed on the second.
struct AdjustStack {
  LayerNormLayer embed_fusion;
  LayerNormLayer embed_first;
  LayerNormLayer embed_second;
  std::vector<CrossmodalBlock> first_stage;
  std::vector<CrossmodalBlock> second_stage;
};

/// `name` is the stream tag used for parameter names and groups, e.g. "ta_prime".
template <typename T>
AdjustStack make_adjust_stack(ParamStore<T>& store, const std::string& name, int blocks_per_stage,
                              const BlockConfig& config, Rng& rng);

template <typename T>
ag::Var self_adjust(Graph<T>& g, ag::Var fusion, ag::Var first_keys, ag::Var second_keys, const AdjustStack& stack,
                    const std::string& site = "xadjust");

// Matrix-level conveniences.
MatD embed(const MatD& x, const LayerNormLayer& ln, const ParamStore<double>& params);
MatD crossmodal_block(const MatD& target, const MatD& source, const CrossmodalBlock& block,
                      const ParamStore<double>& params);
MatD self_adjust(const MatD& fusion, const MatD& first_keys, const MatD& second_keys, const AdjustStack& stack,
                 const ParamStore<double>& params);

}  // namespace safrlm
