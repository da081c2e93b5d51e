#include "safrlm/xadjust.hpp"

#include <cmath>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

template <typename T>
Mat<T> positional_encoding(Eigen::Index length, Eigen::Index width) {
  Mat<T> pe(length, width);
  for (Eigen::Index pos = 0; pos < length; ++pos) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const Eigen::Index i2 = c - (c % 2);
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(i2) / static_cast<double>(width));
      pe(pos, c) = static_cast<T>(c % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return pe;
}

template <typename T>
LayerNormLayer make_layer_norm(ParamStore<T>& store, const std::string& prefix, const std::string& group, int width) {
  return LayerNormLayer{store.add(prefix + ".gain", group, Mat<T>::Ones(1, width)),
                        store.add(prefix + ".offset", group, Mat<T>::Zero(1, width))};
}

template <typename T>
ag::Var apply_layer_norm(Graph<T>& g, ag::Var x, const LayerNormLayer& ln) {
  return ag::layer_norm(g.tape(), x, g.param(ln.gain), g.param(ln.offset), static_cast<T>(kLayerNormEps));
}

template <typename T>
ag::Var embed(Graph<T>& g, ag::Var x, const LayerNormLayer& ln) {
  const auto& v = g.value(x);
  const ag::Var pe = g.input(positional_encoding<T>(v.rows(), v.cols()));
  return apply_layer_norm(g, ag::add(g.tape(), x, pe), ln);
}

void BlockConfig::validate() const {
  if (width < 1 || heads < 1 || width % heads != 0) {
    throw Error(ErrorCode::configuration, "width " + std::to_string(width) + " is not divisible by heads " +
                                              std::to_string(heads));
  }
  if (ff_width < 1) throw Error(ErrorCode::configuration, "feed-forward width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw Error(ErrorCode::configuration, "dropout must lie in [0, 1)");
}

namespace {

template <typename T>
std::pair<ParamId, ParamId> make_affine(ParamStore<T>& store, const std::string& prefix, const std::string& group,
                                        int in, int out, Rng& rng) {
  const ParamId w = store.add(prefix + ".weight", group, uniform_fan_in<T>(in, out, in, rng));
  const ParamId b = store.add(prefix + ".bias", group, uniform_fan_in<T>(1, out, in, rng));
  return {w, b};
}

template <typename T>
ag::Var apply_affine(Graph<T>& g, ag::Var x, ParamId w, ParamId b) {
  auto& t = g.tape();
  return ag::add_row(t, ag::matmul(t, x, g.param(w)), g.param(b));
}

}  // namespace

template <typename T>
CrossmodalBlock make_crossmodal_block(ParamStore<T>& store, const std::string& prefix, const std::string& group,
                                      const BlockConfig& config, Rng& rng) {
  config.validate();
  const int d = config.width;
  CrossmodalBlock b;
  b.config = config;
  b.ln_in = make_layer_norm(store, prefix + ".ln_in", group, d);
  std::tie(b.attn.w_q, b.attn.b_q) = make_affine(store, prefix + ".attn.query", group, d, d, rng);
  std::tie(b.attn.w_k, b.attn.b_k) = make_affine(store, prefix + ".attn.key", group, d, d, rng);
  std::tie(b.attn.w_v, b.attn.b_v) = make_affine(store, prefix + ".attn.value", group, d, d, rng);
  std::tie(b.attn.w_o, b.attn.b_o) = make_affine(store, prefix + ".attn.output", group, d, d, rng);
  b.ln_res = make_layer_norm(store, prefix + ".ln_res", group, d);
  b.ln_ff = make_layer_norm(store, prefix + ".ln_ff", group, d);
  std::tie(b.ff.w_in, b.ff.b_in) = make_affine(store, prefix + ".ff.in", group, d, config.ff_width, rng);
  std::tie(b.ff.w_out, b.ff.b_out) = make_affine(store, prefix + ".ff.out", group, config.ff_width, d, rng);
  return b;
}

template <typename T>
ag::Var crossmodal_block(Graph<T>& g, ag::Var target, ag::Var source, const CrossmodalBlock& block,
                         const std::string& site) {
  const auto& cfg = block.config;
  const auto& tv = g.value(target);
  const auto& sv = g.value(source);
  if (tv.cols() != cfg.width || sv.cols() != cfg.width) {
    throw Error(ErrorCode::shape, "crossmodal block expects width " + std::to_string(cfg.width) + ", got target " +
                                      std::to_string(tv.cols()) + " and source " + std::to_string(sv.cols()));
  }
  auto& t = g.tape();
  const ag::Var q_in = apply_layer_norm(g, target, block.ln_in);
  const ag::Var kv_in = apply_layer_norm(g, source, block.ln_in);
  const ag::Var q = apply_affine(g, q_in, block.attn.w_q, block.attn.b_q);
  const ag::Var k = apply_affine(g, kv_in, block.attn.w_k, block.attn.b_k);
  const ag::Var v = apply_affine(g, kv_in, block.attn.w_v, block.attn.b_v);

  const int head_width = cfg.width / cfg.heads;
  const double scale_dim = cfg.scale == ScaleMode::per_head ? head_width : cfg.width;
  const T scale = static_cast<T>(1.0 / std::sqrt(scale_dim));
  std::vector<ag::Var> heads;
  heads.reserve(static_cast<std::size_t>(cfg.heads));
  for (int h = 0; h < cfg.heads; ++h) {
    const ag::Var qh = ag::slice_cols(t, q, h * head_width, head_width);
    const ag::Var kh = ag::slice_cols(t, k, h * head_width, head_width);
    const ag::Var vh = ag::slice_cols(t, v, h * head_width, head_width);
    const ag::Var weights = ag::softmax_rows(t, ag::affine(t, ag::matmul_nt(t, qh, kh), scale, T(0)));
    if (g.tracing()) g.trace(site + ".head" + std::to_string(h), weights);
    heads.push_back(ag::matmul(t, weights, vh));
  }
  const ag::Var multi = apply_affine(g, ag::concat_cols<T>(t, heads), block.attn.w_o, block.attn.b_o);
  const ag::Var mid = apply_layer_norm(g, ag::add(t, multi, target), block.ln_res);

  ag::Var hidden = ag::softplus(t, apply_affine(g, apply_layer_norm(g, mid, block.ln_ff), block.ff.w_in, block.ff.b_in));
  if (g.training() && cfg.dropout > 0.0) hidden = ag::dropout(t, hidden, cfg.dropout, g.rng());
  return ag::add(t, apply_affine(g, hidden, block.ff.w_out, block.ff.b_out), mid);
}

template <typename T>
AdjustStack make_adjust_stack(ParamStore<T>& store, const std::string& name, int blocks_per_stage,
                              const BlockConfig& config, Rng& rng) {
  if (blocks_per_stage < 1) throw Error(ErrorCode::configuration, "blocks per stage must be >= 1");
  config.validate();
  const std::string base = "xadjust." + name;
  AdjustStack s;
  s.embed_fusion = make_layer_norm(store, base + ".embed.fusion", base + ".embedding", config.width);
  s.embed_first = make_layer_norm(store, base + ".embed.first", base + ".embedding", config.width);
  s.embed_second = make_layer_norm(store, base + ".embed.second", base + ".embedding", config.width);
  for (int i = 0; i < blocks_per_stage; ++i) {
    const std::string p = base + ".first.block" + std::to_string(i);
    s.first_stage.push_back(make_crossmodal_block(store, p, p, config, rng));
  }
  for (int i = 0; i < blocks_per_stage; ++i) {
    const std::string p = base + ".second.block" + std::to_string(i);
    s.second_stage.push_back(make_crossmodal_block(store, p, p, config, rng));
  }
  return s;
}

template <typename T>
ag::Var self_adjust(Graph<T>& g, ag::Var fusion, ag::Var first_keys, ag::Var second_keys, const AdjustStack& stack,
                    const std::string& site) {
  const auto& f = g.value(fusion);
  for (ag::Var v : {first_keys, second_keys}) {
    if (g.value(v).rows() != f.rows() || g.value(v).cols() != f.cols()) {
      throw Error(ErrorCode::shape, "self_adjust: key streams must match the fusion stream shape");
    }
  }
  const ag::Var e_fusion = embed(g, fusion, stack.embed_fusion);
  const ag::Var e_first = embed(g, first_keys, stack.embed_first);
  const ag::Var e_second = embed(g, second_keys, stack.embed_second);
  ag::Var cur = e_fusion;
  for (std::size_t i = 0; i < stack.first_stage.size(); ++i) {
    cur = crossmodal_block(g, cur, e_first, stack.first_stage[i], site + ".first.block" + std::to_string(i));
  }
  for (std::size_t i = 0; i < stack.second_stage.size(); ++i) {
    cur = crossmodal_block(g, cur, e_second, stack.second_stage[i], site + ".second.block" + std::to_string(i));
  }
  return cur;
}

MatD embed(const MatD& x, const LayerNormLayer& ln, const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(embed(g, g.input(x), ln));
}

MatD crossmodal_block(const MatD& target, const MatD& source, const CrossmodalBlock& block,
                      const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(crossmodal_block(g, g.input(target), g.input(source), block));
}

MatD self_adjust(const MatD& fusion, const MatD& first_keys, const MatD& second_keys, const AdjustStack& stack,
                 const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(self_adjust(g, g.input(fusion), g.input(first_keys), g.input(second_keys), stack));
}

#define SAFRLM_INSTANTIATE_XADJUST(T)                                                                             \
  template Mat<T> positional_encoding<T>(Eigen::Index, Eigen::Index);                                            \
  template LayerNormLayer make_layer_norm<T>(ParamStore<T>&, const std::string&, const std::string&, int);        \
  template ag::Var apply_layer_norm<T>(Graph<T>&, ag::Var, const LayerNormLayer&);                               \
  template ag::Var embed<T>(Graph<T>&, ag::Var, const LayerNormLayer&);                                          \
  template CrossmodalBlock make_crossmodal_block<T>(ParamStore<T>&, const std::string&, const std::string&,       \
                                                    const BlockConfig&, Rng&);                                   \
  template ag::Var crossmodal_block<T>(Graph<T>&, ag::Var, ag::Var, const CrossmodalBlock&, const std::string&); \
  template AdjustStack make_adjust_stack<T>(ParamStore<T>&, const std::string&, int, const BlockConfig&, Rng&);   \
  template ag::Var self_adjust<T>(Graph<T>&, ag::Var, ag::Var, ag::Var, const AdjustStack&, const std::string&);

SAFRLM_INSTANTIATE_XADJUST(float)
SAFRLM_INSTANTIATE_XADJUST(double)

}  // namespace safrlm
