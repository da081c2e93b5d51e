#include "safrlm/align.hpp"

#include <array>

#include "safrlm/error.hpp"
#include "safrlm/rng.hpp"

namespace safrlm {

void ConvSpec::validate() const {
  if (kernel_text < 1 || kernel_audio < 1 || stride_text < 1 || stride_audio < 1) {
    throw Error(ErrorCode::configuration, "convolution kernels and strides must be >= 1");
  }
  if (out_channels < 2 || out_channels % 2 != 0) {
    throw Error(ErrorCode::configuration, "conv.out_channels must be even and >= 2 to split Bi-GRU directions, got " +
                                              std::to_string(out_channels));
  }
}

Eigen::Index ConvSpec::aligned_length(Eigen::Index text_length, Eigen::Index audio_length) const {
  validate();
  if (text_length < kernel_text) {
    throw Error(ErrorCode::sequence_too_short, "text length " + std::to_string(text_length) +
                                                   " is shorter than kernel " + std::to_string(kernel_text));
  }
  if (audio_length < kernel_audio) {
    throw Error(ErrorCode::sequence_too_short, "audio length " + std::to_string(audio_length) +
                                                   " is shorter than kernel " + std::to_string(kernel_audio));
  }
  const auto lt = conv_out_length(text_length, kernel_text, stride_text);
  const auto la = conv_out_length(audio_length, kernel_audio, stride_audio);
  if (lt != la) {
    throw Error(ErrorCode::alignment_mismatch, "aligned lengths differ: text " + std::to_string(lt) + " vs audio " +
                                                   std::to_string(la));
  }
  return lt;
}

template <typename T>
ConvLayer make_conv_layer(ParamStore<T>& store, const std::string& prefix, const std::string& group, int kernel,
                          int stride, int in_dim, int out_dim, Rng& rng) {
  if (kernel < 1 || stride < 1) throw Error(ErrorCode::configuration, "kernel and stride must be >= 1");
  const int fan_in = kernel * in_dim;
  ConvLayer l;
  l.kernel = kernel;
  l.stride = stride;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight = store.add(prefix + ".weight", group, uniform_fan_in<T>(fan_in, out_dim, fan_in, rng));
  l.bias = store.add(prefix + ".bias", group, uniform_fan_in<T>(1, out_dim, fan_in, rng));
  return l;
}

namespace {

template <typename T>
GruDirection make_direction(ParamStore<T>& store, const std::string& prefix, const std::string& group, int in_dim,
                            int hidden, Rng& rng) {
  GruDirection d;
  d.hidden = hidden;
  d.w_input = store.add(prefix + ".w_input", group, uniform_fan_in<T>(in_dim, 3 * hidden, in_dim, rng));
  d.w_hidden = store.add(prefix + ".w_hidden", group, uniform_fan_in<T>(hidden, 3 * hidden, hidden, rng));
  d.b_input = store.add(prefix + ".b_input", group, uniform_fan_in<T>(1, 3 * hidden, in_dim, rng));
  d.b_hidden = store.add(prefix + ".b_hidden", group, uniform_fan_in<T>(1, 3 * hidden, hidden, rng));
  return d;
}

/// Runs one direction; outputs are returned in time order regardless of direction.
template <typename T>
std::vector<ag::Var> run_direction(Graph<T>& g, ag::Var sequence, const GruDirection& dir, bool reverse) {
  auto& t = g.tape();
  const Eigen::Index len = g.value(sequence).rows();
  const Eigen::Index h = dir.hidden;
  const ag::Var w_h = g.param(dir.w_hidden);
  const ag::Var b_h = g.param(dir.b_hidden);
  const ag::Var xw = ag::add_row(t, ag::matmul(t, sequence, g.param(dir.w_input)), g.param(dir.b_input));
  ag::Var state = g.input(Mat<T>::Zero(1, h));
  std::vector<ag::Var> outputs(static_cast<std::size_t>(len));
  for (Eigen::Index step = 0; step < len; ++step) {
    const Eigen::Index pos = reverse ? len - 1 - step : step;
    const ag::Var x = ag::slice_rows(t, xw, pos, 1);
    const ag::Var hw = ag::add_row(t, ag::matmul(t, state, w_h), b_h);
    const ag::Var r = ag::sigmoid(t, ag::add(t, ag::slice_cols(t, x, 0, h), ag::slice_cols(t, hw, 0, h)));
    const ag::Var z = ag::sigmoid(t, ag::add(t, ag::slice_cols(t, x, h, h), ag::slice_cols(t, hw, h, h)));
    const ag::Var n = ag::tanh(
        t, ag::add(t, ag::slice_cols(t, x, 2 * h, h), ag::hadamard(t, r, ag::slice_cols(t, hw, 2 * h, h))));
    // h' = n + z * (h - n)
    state = ag::add(t, n, ag::hadamard(t, z, ag::sub(t, state, n)));
    outputs[static_cast<std::size_t>(pos)] = state;
  }
  return outputs;
}

}  // namespace

template <typename T>
BiGru make_bigru(ParamStore<T>& store, const std::string& prefix, const std::string& group, int in_dim, int width,
                 Rng& rng) {
  if (width < 2 || width % 2 != 0) {
    throw Error(ErrorCode::configuration,
                "Bi-GRU width " + std::to_string(width) + " cannot be split evenly into two directions");
  }
  BiGru b;
  b.width = width;
  b.forward = make_direction(store, prefix + ".forward", group, in_dim, width / 2, rng);
  b.backward = make_direction(store, prefix + ".backward", group, in_dim, width / 2, rng);
  return b;
}

template <typename T>
AlignModule make_align_module(ParamStore<T>& store, const ConvSpec& spec, int d_text, int d_audio, int gru_depth,
                              Rng& rng) {
  spec.validate();
  if (gru_depth < 1) throw Error(ErrorCode::configuration, "gru.depth must be >= 1");
  const int d = spec.out_channels;
  auto branch = [&](const std::string& name, int kernel, int stride, int in_dim) {
    AlignBranch b;
    b.conv = make_conv_layer(store, "align." + name + ".conv", "align." + name + ".conv", kernel, stride, in_dim, d,
                             rng);
    for (int k = 0; k < gru_depth; ++k) {
      const std::string p = "align." + name + ".bigru" + std::to_string(k);
      b.gru.push_back(make_bigru(store, p, p, d, d, rng));
    }
    return b;
  };
  AlignModule m;
  m.text = branch("text", spec.kernel_text, spec.stride_text, d_text);
  m.audio = branch("audio", spec.kernel_audio, spec.stride_audio, d_audio);
  return m;
}

template <typename T>
ag::Var conv_align(Graph<T>& g, ag::Var features, const ConvLayer& layer) {
  auto& t = g.tape();
  const Mat<T>& x = g.value(features);
  if (x.cols() != layer.in_dim) {
    throw Error(ErrorCode::shape, "convolution expects width " + std::to_string(layer.in_dim) + ", got " +
                                      std::to_string(x.cols()));
  }
  if (x.rows() < layer.kernel) {
    throw Error(ErrorCode::sequence_too_short, "sequence length " + std::to_string(x.rows()) +
                                                   " is shorter than kernel " + std::to_string(layer.kernel));
  }
  const ag::Var windows = ag::unfold_windows(t, features, layer.kernel, layer.stride);
  return ag::add_row(t, ag::matmul(t, windows, g.param(layer.weight)), g.param(layer.bias));
}

template <typename T>
ag::Var bigru_encode(Graph<T>& g, ag::Var sequence, const BiGru& gru) {
  if (g.value(sequence).rows() < 1) throw Error(ErrorCode::shape, "Bi-GRU input sequence is empty");
  auto& t = g.tape();
  const auto fwd = run_direction(g, sequence, gru.forward, false);
  const auto bwd = run_direction(g, sequence, gru.backward, true);
  const ag::Var f = ag::concat_rows<T>(t, fwd);
  const ag::Var b = ag::concat_rows<T>(t, bwd);
  const std::array<ag::Var, 2> parts{f, b};
  return ag::concat_cols<T>(t, parts);
}

template <typename T>
ag::Var encode_branch(Graph<T>& g, ag::Var features, const AlignBranch& branch) {
  ag::Var x = conv_align(g, features, branch.conv);
  for (const auto& layer : branch.gru) x = bigru_encode(g, x, layer);
  return x;
}

template <typename T>
AlignedVars align_pair(Graph<T>& g, ag::Var text, ag::Var audio, const AlignModule& module) {
  const auto& ct = module.text.conv;
  const auto& ca = module.audio.conv;
  const auto lt_in = g.value(text).rows();
  const auto la_in = g.value(audio).rows();
  if (lt_in >= ct.kernel && la_in >= ca.kernel) {
    const auto lt = conv_out_length(lt_in, ct.kernel, ct.stride);
    const auto la = conv_out_length(la_in, ca.kernel, ca.stride);
    if (lt != la) {
      throw Error(ErrorCode::alignment_mismatch, "aligned lengths differ: text " + std::to_string(lt) +
                                                     " vs audio " + std::to_string(la));
    }
  }
  return AlignedVars{encode_branch(g, text, module.text), encode_branch(g, audio, module.audio)};
}

MatD conv_align(const MatD& features, const ConvLayer& layer, const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(conv_align(g, g.input(features), layer));
}

MatD bigru_encode(const MatD& sequence, const BiGru& gru, const ParamStore<double>& params) {
  Graph<double> g(params);
  return g.value(bigru_encode(g, g.input(sequence), gru));
}

AlignedPair align_pair(const MatD& text, const MatD& audio, const AlignModule& module,
                       const ParamStore<double>& params) {
  Graph<double> g(params);
  const auto out = align_pair(g, g.input(text), g.input(audio), module);
  return AlignedPair{g.value(out.text), g.value(out.audio)};
}

#define SAFRLM_INSTANTIATE_ALIGN(T)                                                                              \
  template ConvLayer make_conv_layer<T>(ParamStore<T>&, const std::string&, const std::string&, int, int, int, \
                                        int, Rng&);                                                             \
  template BiGru make_bigru<T>(ParamStore<T>&, const std::string&, const std::string&, int, int, Rng&);         \
  template AlignModule make_align_module<T>(ParamStore<T>&, const ConvSpec&, int, int, int, Rng&);              \
  template ag::Var conv_align<T>(Graph<T>&, ag::Var, const ConvLayer&);                                         \
  template ag::Var bigru_encode<T>(Graph<T>&, ag::Var, const BiGru&);                                           \
  template ag::Var encode_branch<T>(Graph<T>&, ag::Var, const AlignBranch&);                                    \
  template AlignedVars align_pair<T>(Graph<T>&, ag::Var, ag::Var, const AlignModule&);

SAFRLM_INSTANTIATE_ALIGN(float)
SAFRLM_INSTANTIATE_ALIGN(double)

}  // namespace safrlm
