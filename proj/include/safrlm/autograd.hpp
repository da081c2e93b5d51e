#pragma once

// Minimal reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every intermediate value together with a closure that maps
// the gradient of that value onto the gradients of its parents. Nodes are
// appended in evaluation order, so a single reverse sweep is a valid
// topological traversal.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace safrlm {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatD = Mat<double>;
using MatF = Mat<float>;

class Rng;

namespace ag {

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

template <typename T>
class Tape {
 public:
  using Matrix = Mat<T>;
  /// Receives the node's output gradient and its forward value.
  using Backward = std::function<void(Tape&, const Matrix& grad_out, const Matrix& value)>;

  Var constant(Matrix value) { return push(std::move(value), false, {}); }

  Var variable(Matrix value) { return push(std::move(value), true, {}); }

  /// Appends a derived node. The node requires a gradient iff any parent does;
  /// otherwise the closure is dropped.
  Var record(Matrix value, std::initializer_list<Var> parents, Backward fn) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : Backward{});
  }

  Var record(Matrix value, std::span<const Var> parents, Backward fn) {
    bool needs = false;
    for (Var p : parents) needs = needs || nodes_[p.id].requires_grad;
    return push(std::move(value), needs, needs ? std::move(fn) : Backward{});
  }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  template <typename Derived>
  void accumulate(Var v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Gradient of the last backward() root with respect to v; zeros when v
  /// did not influence the root.
  Matrix grad(Var v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.size() == 0) return Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Reverse sweep from a 1x1 root.
  void backward(Var root) {
    for (auto& n : nodes_) n.grad.resize(0, 0);
    Node& r = nodes_[root.id];
    r.grad = Matrix::Ones(r.value.rows(), r.value.cols());
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.size() == 0) continue;
      // The closure only touches parents, which precede i, so n stays valid.
      n.backward(*this, n.grad, n.value);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  Var push(Matrix value, bool requires_grad, Backward fn) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, std::move(fn)});
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

// Elementwise and linear algebra.
template <typename T> Var add(Tape<T>& t, Var a, Var b);
template <typename T> Var sub(Tape<T>& t, Var a, Var b);
/// a (r x c) plus a 1 x c row repeated over rows.
template <typename T> Var add_row(Tape<T>& t, Var a, Var row);
template <typename T> Var hadamard(Tape<T>& t, Var a, Var b);
/// alpha * a + beta, constants.
template <typename T> Var affine(Tape<T>& t, Var a, T alpha, T beta);
/// 1x1 variable times a matrix.
template <typename T> Var scalar_mul(Tape<T>& t, Var s, Var a);
template <typename T> Var matmul(Tape<T>& t, Var a, Var b);
/// a * b^T
template <typename T> Var matmul_nt(Tape<T>& t, Var a, Var b);
template <typename T> Var transpose(Tape<T>& t, Var a);

// Pointwise nonlinearities.
template <typename T> Var tanh(Tape<T>& t, Var a);
template <typename T> Var sigmoid(Tape<T>& t, Var a);
template <typename T> Var softplus(Tape<T>& t, Var a);
template <typename T> Var abs(Tape<T>& t, Var a);

/// Softmax along each row.
template <typename T> Var softmax_rows(Tape<T>& t, Var a);
/// Per-row normalization to zero mean, unit (biased) variance, then gain/offset (1 x c).
template <typename T> Var layer_norm(Tape<T>& t, Var x, Var gain, Var offset, T eps);

// Structure.
template <typename T> Var slice_rows(Tape<T>& t, Var a, Eigen::Index start, Eigen::Index count);
template <typename T> Var slice_cols(Tape<T>& t, Var a, Eigen::Index start, Eigen::Index count);
template <typename T> Var concat_rows(Tape<T>& t, std::span<const Var> parts);
template <typename T> Var concat_cols(Tape<T>& t, std::span<const Var> parts);
/// Mean over rows, giving 1 x c.
template <typename T> Var mean_rows(Tape<T>& t, Var a);
template <typename T> Var sum_all(Tape<T>& t, Var a);
/// Flattens sliding windows of `kernel` rows with step `stride` into rows of
/// width kernel * cols. Window t covers rows [t*stride, t*stride + kernel).
template <typename T> Var unfold_windows(Tape<T>& t, Var a, int kernel, int stride);
/// Inverted dropout with keep-probability 1 - rate.
template <typename T> Var dropout(Tape<T>& t, Var a, double rate, Rng& rng);

}  // namespace ag
}  // namespace safrlm
