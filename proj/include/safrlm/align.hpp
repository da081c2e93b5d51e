#pragma once

// Crossmodal alignment: per-modality valid 1D temporal convolution to a shared
// width d and length l, followed by a bidirectional GRU per modality.

#include <string>
#include <vector>

#include "safrlm/graph.hpp"

namespace safrlm {

class Rng;

/// floor((length - kernel) / stride) + 1; only meaningful for length >= kernel.
constexpr Eigen::Index conv_out_length(Eigen::Index length, int kernel, int stride) {
  return (length - kernel) / stride + 1;
}

struct ConvSpec {
  int kernel_text = 1;
  int stride_text = 1;
  int kernel_audio = 30;
  int stride_audio = 7;
  int out_channels = 50;

  /// Throws ErrorCode::configuration unless kernels/strides are >= 1.
  void validate() const;
  /// Shared aligned length l for the given padded input lengths; throws
  /// sequence_too_short or alignment_mismatch.
  Eigen::Index aligned_length(Eigen::Index text_length, Eigen::Index audio_length) const;
};

struct ConvLayer {
  ParamId weight;  // (kernel * in_dim) x out_dim
  ParamId bias;    // 1 x out_dim
  int kernel = 1;
  int stride = 1;
  int in_dim = 0;
  int out_dim = 0;
};

template <typename T>
ConvLayer make_conv_layer(ParamStore<T>& store, const std::string& prefix, const std::string& group, int kernel,
                          int stride, int in_dim, int out_dim, Rng& rng);

/// One GRU direction, gate column order [reset | update | candidate]:
///   r = sig(x W_ir + b_ir + h W_hr + b_hr)
///   z = sig(x W_iz + b_iz + h W_hz + b_hz)
///   n = tanh(x W_in + b_in + r * (h W_hn + b_hn))
///   h' = (1 - z) * n + z * h
struct GruDirection {
  ParamId w_input;   // in_dim x 3H
  ParamId w_hidden;  // H x 3H
  ParamId b_input;   // 1 x 3H
  ParamId b_hidden;  // 1 x 3H
  int hidden = 0;
};

struct BiGru {
  GruDirection forward;
  GruDirection backward;
  int width = 0;  // 2 * hidden
};

/// Width must be even: each direction carries width / 2 units.
template <typename T>
BiGru make_bigru(ParamStore<T>& store, const std::string& prefix, const std::string& group, int in_dim, int width,
                 Rng& rng);

struct AlignBranch {
  ConvLayer conv;
  std::vector<BiGru> gru;  // stacked; depth 1 by default
};

struct AlignModule {
  AlignBranch text;
  AlignBranch audio;
};

template <typename T>
AlignModule make_align_module(ParamStore<T>& store, const ConvSpec& spec, int d_text, int d_audio, int gru_depth,
                              Rng& rng);

template <typename T>
ag::Var conv_align(Graph<T>& g, ag::Var features, const ConvLayer& layer);

template <typename T>
ag::Var bigru_encode(Graph<T>& g, ag::Var sequence, const BiGru& gru);

template <typename T>
ag::Var encode_branch(Graph<T>& g, ag::Var features, const AlignBranch& branch);

struct AlignedVars {
  ag::Var text;
  ag::Var audio;
};

/// Fails with alignment_mismatch (naming both lengths) when the branches
/// disagree on l.
template <typename T>
AlignedVars align_pair(Graph<T>& g, ag::Var text, ag::Var audio, const AlignModule& module);

// Matrix-level conveniences (evaluation mode).
struct AlignedPair {
  MatD text;
  MatD audio;
};

MatD conv_align(const MatD& features, const ConvLayer& layer, const ParamStore<double>& params);
MatD bigru_encode(const MatD& sequence, const BiGru& gru, const ParamStore<double>& params);
AlignedPair align_pair(const MatD& text, const MatD& audio, const AlignModule& module,
                       const ParamStore<double>& params);

}  // namespace safrlm
