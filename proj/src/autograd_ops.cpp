#include "safrlm/autograd.hpp"

#include <cmath>

#include "safrlm/rng.hpp"

namespace safrlm::ag {

template <typename T>
Var add(Tape<T>& t, Var a, Var b) {
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

template <typename T>
Var sub(Tape<T>& t, Var a, Var b) {
  return t.record(t.value(a) - t.value(b), {a, b}, [a, b](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    tp.accumulate(a, g);
    tp.accumulate(b, -g);
  });
}

template <typename T>
Var add_row(Tape<T>& t, Var a, Var row) {
  Mat<T> out = t.value(a).rowwise() + t.value(row).row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    tp.accumulate(a, g);
    tp.accumulate(row, g.colwise().sum());
  });
}

template <typename T>
Var hadamard(Tape<T>& t, Var a, Var b) {
  Mat<T> out = t.value(a).cwiseProduct(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    if (tp.requires_grad(a)) tp.accumulate(a, g.cwiseProduct(tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, g.cwiseProduct(tp.value(a)));
  });
}

template <typename T>
Var affine(Tape<T>& t, Var a, T alpha, T beta) {
  Mat<T> out = (alpha * t.value(a)).array() + beta;
  return t.record(std::move(out), {a},
                  [a, alpha](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) { tp.accumulate(a, alpha * g); });
}

template <typename T>
Var scalar_mul(Tape<T>& t, Var s, Var a) {
  Mat<T> out = t.value(s)(0, 0) * t.value(a);
  return t.record(std::move(out), {s, a}, [s, a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    if (tp.requires_grad(s)) {
      Mat<T> gs(1, 1);
      gs(0, 0) = g.cwiseProduct(tp.value(a)).sum();
      tp.accumulate(s, gs);
    }
    if (tp.requires_grad(a)) tp.accumulate(a, tp.value(s)(0, 0) * g);
  });
}

template <typename T>
Var matmul(Tape<T>& t, Var a, Var b) {
  Mat<T> out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b).transpose());
    if (tp.requires_grad(b)) tp.accumulate(b, tp.value(a).transpose() * g);
  });
}

template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b) {
  Mat<T> out = t.value(a) * t.value(b).transpose();
  return t.record(std::move(out), {a, b}, [a, b](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    if (tp.requires_grad(a)) tp.accumulate(a, g * tp.value(b));
    if (tp.requires_grad(b)) tp.accumulate(b, g.transpose() * tp.value(a));
  });
}

template <typename T>
Var transpose(Tape<T>& t, Var a) {
  Mat<T> out = t.value(a).transpose();
  return t.record(std::move(out), {a},
                  [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) { tp.accumulate(a, g.transpose()); });
}

template <typename T>
Var tanh(Tape<T>& t, Var a) {
  Mat<T> out = t.value(a).array().tanh().matrix();
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>& y) {
    tp.accumulate(a, (g.array() * (T(1) - y.array().square())).matrix());
  });
}

template <typename T>
Var sigmoid(Tape<T>& t, Var a) {
  Mat<T> out = (T(1) / (T(1) + (-t.value(a).array()).exp())).matrix();
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>& y) {
    tp.accumulate(a, (g.array() * y.array() * (T(1) - y.array())).matrix());
  });
}

namespace {

template <typename T>
T softplus_scalar(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T logistic(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

}  // namespace

template <typename T>
Var softplus(Tape<T>& t, Var a) {
  Mat<T> out = t.value(a).unaryExpr([](T x) { return softplus_scalar(x); });
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    Mat<T> d = tp.value(a).unaryExpr([](T x) { return logistic(x); });
    tp.accumulate(a, g.cwiseProduct(d));
  });
}

template <typename T>
Var abs(Tape<T>& t, Var a) {
  Mat<T> out = t.value(a).cwiseAbs();
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    Mat<T> sign = tp.value(a).unaryExpr([](T x) { return T((x > T(0)) - (x < T(0))); });
    tp.accumulate(a, g.cwiseProduct(sign));
  });
}

template <typename T>
Var softmax_rows(Tape<T>& t, Var a) {
  const Mat<T>& x = t.value(a);
  Mat<T> out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const T m = x.row(r).maxCoeff();
    out.row(r) = (x.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>& y) {
    // dx = y * (g - <g, y>) per row
    Eigen::Matrix<T, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
    Mat<T> dx = y.cwiseProduct(g - dot.replicate(1, g.cols()));
    tp.accumulate(a, dx);
  });
}

template <typename T>
Var layer_norm(Tape<T>& t, Var x, Var gain, Var offset, T eps) {
  const Mat<T>& in = t.value(x);
  const Eigen::Index n = in.cols();
  Mat<T> xhat(in.rows(), n);
  Eigen::Matrix<T, Eigen::Dynamic, 1> inv_std(in.rows());
  for (Eigen::Index r = 0; r < in.rows(); ++r) {
    const T mean = in.row(r).mean();
    const T var = (in.row(r).array() - mean).square().mean();
    inv_std(r) = T(1) / std::sqrt(var + eps);
    xhat.row(r) = (in.row(r).array() - mean) * inv_std(r);
  }
  Mat<T> out = (xhat.array().rowwise() * t.value(gain).row(0).array()).matrix();
  out.rowwise() += t.value(offset).row(0);
  return t.record(std::move(out), {x, gain, offset},
                  [x, gain, offset, xhat = std::move(xhat), inv_std = std::move(inv_std)](
                      Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
                    if (tp.requires_grad(gain)) tp.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
                    if (tp.requires_grad(offset)) tp.accumulate(offset, g.colwise().sum());
                    if (!tp.requires_grad(x)) return;
                    Mat<T> gx = (g.array().rowwise() * tp.value(gain).row(0).array()).matrix();
                    const T n = static_cast<T>(gx.cols());
                    Mat<T> dx(gx.rows(), gx.cols());
                    for (Eigen::Index r = 0; r < gx.rows(); ++r) {
                      const T mean_g = gx.row(r).mean();
                      const T mean_gx = gx.row(r).cwiseProduct(xhat.row(r)).sum() / n;
                      dx.row(r) = inv_std(r) * (gx.row(r).array() - mean_g - xhat.row(r).array() * mean_gx);
                    }
                    tp.accumulate(x, dx);
                  });
}

template <typename T>
Var slice_rows(Tape<T>& t, Var a, Eigen::Index start, Eigen::Index count) {
  Mat<T> out = t.value(a).middleRows(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    const Mat<T>& v = tp.value(a);
    Mat<T> full = Mat<T>::Zero(v.rows(), v.cols());
    full.middleRows(start, count) = g;
    tp.accumulate(a, full);
  });
}

template <typename T>
Var slice_cols(Tape<T>& t, Var a, Eigen::Index start, Eigen::Index count) {
  Mat<T> out = t.value(a).middleCols(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    const Mat<T>& v = tp.value(a);
    Mat<T> full = Mat<T>::Zero(v.rows(), v.cols());
    full.middleCols(start, count) = g;
    tp.accumulate(a, full);
  });
}

template <typename T>
Var concat_rows(Tape<T>& t, std::span<const Var> parts) {
  Eigen::Index rows = 0;
  const Eigen::Index cols = t.value(parts[0]).cols();
  for (Var p : parts) rows += t.value(p).rows();
  Mat<T> out(rows, cols);
  Eigen::Index r = 0;
  for (Var p : parts) {
    out.middleRows(r, t.value(p).rows()) = t.value(p);
    r += t.value(p).rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ps](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    Eigen::Index r0 = 0;
    for (Var p : ps) {
      const Eigen::Index n = tp.value(p).rows();
      if (tp.requires_grad(p)) tp.accumulate(p, g.middleRows(r0, n));
      r0 += n;
    }
  });
}

template <typename T>
Var concat_cols(Tape<T>& t, std::span<const Var> parts) {
  Eigen::Index cols = 0;
  const Eigen::Index rows = t.value(parts[0]).rows();
  for (Var p : parts) cols += t.value(p).cols();
  Mat<T> out(rows, cols);
  Eigen::Index c = 0;
  for (Var p : parts) {
    out.middleCols(c, t.value(p).cols()) = t.value(p);
    c += t.value(p).cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ps](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    Eigen::Index c0 = 0;
    for (Var p : ps) {
      const Eigen::Index n = tp.value(p).cols();
      if (tp.requires_grad(p)) tp.accumulate(p, g.middleCols(c0, n));
      c0 += n;
    }
  });
}

template <typename T>
Var mean_rows(Tape<T>& t, Var a) {
  Mat<T> out = t.value(a).colwise().mean();
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    const Eigen::Index n = tp.value(a).rows();
    tp.accumulate(a, (g / static_cast<T>(n)).replicate(n, 1));
  });
}

template <typename T>
Var sum_all(Tape<T>& t, Var a) {
  Mat<T> out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a}, [a](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    const Mat<T>& v = tp.value(a);
    tp.accumulate(a, Mat<T>::Constant(v.rows(), v.cols(), g(0, 0)));
  });
}

template <typename T>
Var unfold_windows(Tape<T>& t, Var a, int kernel, int stride) {
  const Mat<T>& x = t.value(a);
  const Eigen::Index len = x.rows();
  const Eigen::Index width = x.cols();
  const Eigen::Index out_len = (len - kernel) / stride + 1;
  Mat<T> out(out_len, kernel * width);
  for (Eigen::Index o = 0; o < out_len; ++o) {
    for (int j = 0; j < kernel; ++j) {
      out.block(o, j * width, 1, width) = x.row(o * stride + j);
    }
  }
  return t.record(std::move(out), {a}, [a, kernel, stride](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    const Mat<T>& v = tp.value(a);
    const Eigen::Index w = v.cols();
    Mat<T> full = Mat<T>::Zero(v.rows(), w);
    for (Eigen::Index o = 0; o < g.rows(); ++o) {
      for (int j = 0; j < kernel; ++j) full.row(o * stride + j) += g.block(o, j * w, 1, w);
    }
    tp.accumulate(a, full);
  });
}

template <typename T>
Var dropout(Tape<T>& t, Var a, double rate, Rng& rng) {
  const Mat<T>& x = t.value(a);
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  Mat<T> mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = rng.uniform() < rate ? T(0) : scale;
  }
  Mat<T> out = x.cwiseProduct(mask);
  return t.record(std::move(out), {a}, [a, mask = std::move(mask)](Tape<T>& tp, const Mat<T>& g, const Mat<T>&) {
    tp.accumulate(a, g.cwiseProduct(mask));
  });
}

#define SAFRLM_INSTANTIATE_OPS(T)                                                        \
  template Var add<T>(Tape<T>&, Var, Var);                                               \
  template Var sub<T>(Tape<T>&, Var, Var);                                               \
  template Var add_row<T>(Tape<T>&, Var, Var);                                           \
  template Var hadamard<T>(Tape<T>&, Var, Var);                                          \
  template Var affine<T>(Tape<T>&, Var, T, T);                                           \
  template Var scalar_mul<T>(Tape<T>&, Var, Var);                                        \
  template Var matmul<T>(Tape<T>&, Var, Var);                                            \
  template Var matmul_nt<T>(Tape<T>&, Var, Var);                                         \
  template Var transpose<T>(Tape<T>&, Var);                                              \
  template Var tanh<T>(Tape<T>&, Var);                                                   \
  template Var sigmoid<T>(Tape<T>&, Var);                                                \
  template Var softplus<T>(Tape<T>&, Var);                                               \
  template Var abs<T>(Tape<T>&, Var);                                                    \
  template Var softmax_rows<T>(Tape<T>&, Var);                                           \
  template Var layer_norm<T>(Tape<T>&, Var, Var, Var, T);                                \
  template Var slice_rows<T>(Tape<T>&, Var, Eigen::Index, Eigen::Index);                 \
  template Var slice_cols<T>(Tape<T>&, Var, Eigen::Index, Eigen::Index);                 \
  template Var concat_rows<T>(Tape<T>&, std::span<const Var>);                           \
  template Var concat_cols<T>(Tape<T>&, std::span<const Var>);                           \
  template Var mean_rows<T>(Tape<T>&, Var);                                              \
  template Var sum_all<T>(Tape<T>&, Var);                                                \
  template Var unfold_windows<T>(Tape<T>&, Var, int, int);                               \
  template Var dropout<T>(Tape<T>&, Var, double, Rng&);

SAFRLM_INSTANTIATE_OPS(float)
SAFRLM_INSTANTIATE_OPS(double)

}  // namespace safrlm::ag
