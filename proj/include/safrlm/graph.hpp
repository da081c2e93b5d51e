#pragma once

#include <functional>
#include <string>

#include "safrlm/autograd.hpp"
#include "safrlm/params.hpp"

namespace safrlm {

class Rng;

/// Observer for every attention distribution computed during a forward pass.
/// `site` names the producer (e.g. "collab.S_TA", "xadjust.ta_prime.text.block0.head1").
using AttentionTrace = std::function<void(const std::string& site, const MatD& weights)>;

/// Per-forward evaluation context: the tape, bound parameters, and mode.
template <typename T>
class Graph {
 public:
  explicit Graph(const ParamStore<T>& params, bool trainable = false)
      : binder_(tape_, params, trainable) {}

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  ag::Tape<T>& tape() { return tape_; }
  ag::Var param(ParamId id) { return binder_(id); }
  Mat<T> param_grad(ParamId id) const { return binder_.gradient(id); }

  ag::Var input(Mat<T> value) { return tape_.constant(std::move(value)); }
  const Mat<T>& value(ag::Var v) const { return tape_.value(v); }

  /// Dropout is active only when training and a generator is attached.
  bool training() const { return training_ && rng_ != nullptr; }
  void set_training(Rng* rng) {
    training_ = rng != nullptr;
    rng_ = rng;
  }
  Rng& rng() { return *rng_; }

  void set_trace(AttentionTrace trace) { trace_ = std::move(trace); }
  void trace(const std::string& site, ag::Var weights) const {
    if (trace_) trace_(site, tape_.value(weights).template cast<double>());
  }
  bool tracing() const { return static_cast<bool>(trace_); }

 private:
  ag::Tape<T> tape_;
  ParamBinder<T> binder_;
  bool training_ = false;
  Rng* rng_ = nullptr;
  AttentionTrace trace_;
};

}  // namespace safrlm
