#pragma once

// Fusion representation initialization: crossmodal collaboration attention
// between the aligned text and audio sequences, then two weighted-sum fusions.

#include <string>

#include "safrlm/graph.hpp"

namespace safrlm {

struct CollabAttnVars {
  ag::Var m_ta, m_at;  // l x l raw affinities
  ag::Var s_ta, s_at;  // row-softmax of tanh(M)
  ag::Var o_ta, o_at;  // l x d attended sources
  ag::Var x_tp, x_ap;  // O (elementwise) X
};

/// M_TA = X_T X_A^T, M_AT = M_TA^T, S = rowsoftmax(tanh(M)),
/// O_TA = S_TA X_A, O_AT = S_AT X_T, X_T' = O_TA * X_T, X_A' = O_AT * X_A.
/// Emits trace sites "collab.S_TA" and "collab.S_AT".
template <typename T>
CollabAttnVars collab_attention(Graph<T>& g, ag::Var x_t, ag::Var x_a);

/// Scalars w_* (1 x 1) and bias rows b_* (1 x d), initialized to 1 and 0.
struct FusionWeights {
  ParamId w_t, w_ap, w_tp, w_a;
  ParamId b_tap, b_tpa;
};

template <typename T>
FusionWeights make_fusion_weights(ParamStore<T>& store, int width, const std::string& group = "fusion.weights");

struct FusionVars {
  ag::Var x_tap;  // w_T X_T + w_A' X_A' + b_TA'
  ag::Var x_tpa;  // w_T' X_T' + w_A X_A + b_T'A
};

template <typename T>
FusionVars init_fusion(Graph<T>& g, ag::Var x_t, ag::Var x_a, ag::Var x_tp, ag::Var x_ap, const FusionWeights& w);

// Matrix-level conveniences.
struct CollabAttnOutput {
  MatD m_ta, m_at, s_ta, s_at, o_ta, o_at, x_tp, x_ap;
};

CollabAttnOutput collab_attention(const MatD& x_t, const MatD& x_a);

struct FusionPair {
  MatD x_tap;
  MatD x_tpa;
};

FusionPair init_fusion(const MatD& x_t, const MatD& x_a, const MatD& x_tp, const MatD& x_ap, const FusionWeights& w,
                       const ParamStore<double>& params);

}  // namespace safrlm
