#include "safrlm/fusion.hpp"

#include "safrlm/error.hpp"

namespace safrlm {

namespace {

template <typename T>
void require_same_shape(const Graph<T>& g, std::initializer_list<ag::Var> vars, const char* op) {
  const auto& first = g.value(*vars.begin());
  for (ag::Var v : vars) {
    const auto& m = g.value(v);
    if (m.rows() != first.rows() || m.cols() != first.cols()) {
      throw Error(ErrorCode::shape, std::string(op) + ": inputs must share shape (" + std::to_string(first.rows()) +
                                        " x " + std::to_string(first.cols()) + "), got (" +
                                        std::to_string(m.rows()) + " x " + std::to_string(m.cols()) + ")");
    }
  }
}

}  // namespace

template <typename T>
CollabAttnVars collab_attention(Graph<T>& g, ag::Var x_t, ag::Var x_a) {
  require_same_shape(g, {x_t, x_a}, "collab_attention");
  auto& t = g.tape();
  CollabAttnVars o;
  o.m_ta = ag::matmul_nt(t, x_t, x_a);
  // X_A X_T^T is exactly the transpose; taking it keeps the two bit-identical.
  o.m_at = ag::transpose(t, o.m_ta);
  o.s_ta = ag::softmax_rows(t, ag::tanh(t, o.m_ta));
  o.s_at = ag::softmax_rows(t, ag::tanh(t, o.m_at));
  g.trace("collab.S_TA", o.s_ta);
  g.trace("collab.S_AT", o.s_at);
  o.o_ta = ag::matmul(t, o.s_ta, x_a);
  o.o_at = ag::matmul(t, o.s_at, x_t);
  o.x_tp = ag::hadamard(t, o.o_ta, x_t);
  o.x_ap = ag::hadamard(t, o.o_at, x_a);
  return o;
}

template <typename T>
FusionWeights make_fusion_weights(ParamStore<T>& store, int width, const std::string& group) {
  const Mat<T> one = Mat<T>::Ones(1, 1);
  const Mat<T> zero_row = Mat<T>::Zero(1, width);
  FusionWeights w;
  w.w_t = store.add("fusion.w_t", group, one);
  w.w_ap = store.add("fusion.w_a_prime", group, one);
  w.w_tp = store.add("fusion.w_t_prime", group, one);
  w.w_a = store.add("fusion.w_a", group, one);
  w.b_tap = store.add("fusion.b_ta_prime", group, zero_row);
  w.b_tpa = store.add("fusion.b_t_prime_a", group, zero_row);
  return w;
}

template <typename T>
FusionVars init_fusion(Graph<T>& g, ag::Var x_t, ag::Var x_a, ag::Var x_tp, ag::Var x_ap, const FusionWeights& w) {
  require_same_shape(g, {x_t, x_a, x_tp, x_ap}, "init_fusion");
  auto& t = g.tape();
  FusionVars f;
  f.x_tap = ag::add_row(
      t, ag::add(t, ag::scalar_mul(t, g.param(w.w_t), x_t), ag::scalar_mul(t, g.param(w.w_ap), x_ap)),
      g.param(w.b_tap));
  f.x_tpa = ag::add_row(
      t, ag::add(t, ag::scalar_mul(t, g.param(w.w_tp), x_tp), ag::scalar_mul(t, g.param(w.w_a), x_a)),
      g.param(w.b_tpa));
  return f;
}

CollabAttnOutput collab_attention(const MatD& x_t, const MatD& x_a) {
  const ParamStore<double> none;
  Graph<double> g(none);
  const auto v = collab_attention(g, g.input(x_t), g.input(x_a));
  return CollabAttnOutput{g.value(v.m_ta), g.value(v.m_at), g.value(v.s_ta), g.value(v.s_at),
                          g.value(v.o_ta), g.value(v.o_at), g.value(v.x_tp), g.value(v.x_ap)};
}

FusionPair init_fusion(const MatD& x_t, const MatD& x_a, const MatD& x_tp, const MatD& x_ap, const FusionWeights& w,
                       const ParamStore<double>& params) {
  Graph<double> g(params);
  const auto v = init_fusion(g, g.input(x_t), g.input(x_a), g.input(x_tp), g.input(x_ap), w);
  return FusionPair{g.value(v.x_tap), g.value(v.x_tpa)};
}

template CollabAttnVars collab_attention<float>(Graph<float>&, ag::Var, ag::Var);
template CollabAttnVars collab_attention<double>(Graph<double>&, ag::Var, ag::Var);
template FusionWeights make_fusion_weights<float>(ParamStore<float>&, int, const std::string&);
template FusionWeights make_fusion_weights<double>(ParamStore<double>&, int, const std::string&);
template FusionVars init_fusion<float>(Graph<float>&, ag::Var, ag::Var, ag::Var, ag::Var, const FusionWeights&);
template FusionVars init_fusion<double>(Graph<double>&, ag::Var, ag::Var, ag::Var, ag::Var, const FusionWeights&);

}  // namespace safrlm
