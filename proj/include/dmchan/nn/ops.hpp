#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "dmchan/nn/tape.hpp"

namespace dmchan::nn {

namespace detail {

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

template <typename T>
void require_rank2(const Var<T>& a, const char* op) {
  if (a.shape().size() != 2) throw ShapeError(std::string(op) + ": expected rank-2 operand, got " +
                                              shape_string(a.shape()));
}

template <typename T>
void add_into(Tape<T>& tape, Var<T> target, const Tensor<T>& g) {
  if (!tape.needs_grad(target.id)) return;
  Tensor<T>& slot = tape.grad_slot(target.id);
  for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
}

/// Elementwise map with derivative dy/dx expressed through (x, y).
template <typename T, typename F, typename D>
Var<T> unary(Var<T> x, F f, D df) {
  const Tensor<T>& xv = x.value();
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = f(xv[i]);
  return x.tape->push(std::move(y), {x}, [x, df](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(x.id)) return;
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& xv = tape.value(x.id);
    const Tensor<T>& yv = tape.value(self);
    Tensor<T>& gx = tape.grad_slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df(xv[i], yv[i]);
  });
}

}  // namespace detail

/// x[b, i] · w[i, o].
template <typename T>
Var<T> matmul(Var<T> x, Var<T> w) {
  detail::require_rank2(x, "matmul");
  detail::require_rank2(w, "matmul");
  const Tensor<T>& a = x.value();
  const Tensor<T>& b = w.value();
  const std::size_t batch = a.rows(), in = a.cols(), out = b.cols();
  if (b.rows() != in)
    throw ShapeError("matmul: inner dimension mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  Tensor<T> y({batch, out});
  for (std::size_t r = 0; r < batch; ++r) {
    T* yr = y.data().data() + r * out;
    const T* ar = a.data().data() + r * in;
    for (std::size_t k = 0; k < in; ++k) {
      const T av = ar[k];
      const T* br = b.data().data() + k * out;
      for (std::size_t c = 0; c < out; ++c) yr[c] += av * br[c];
    }
  }
  return x.tape->push(std::move(y), {x, w}, [x, w](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& a = tape.value(x.id);
    const Tensor<T>& b = tape.value(w.id);
    const std::size_t batch = a.rows(), in = a.cols(), out = b.cols();
    if (tape.needs_grad(x.id)) {
      // dx = g · wᵀ, using a transposed copy for contiguous inner loops.
      std::vector<T> bt(in * out);
      for (std::size_t k = 0; k < in; ++k)
        for (std::size_t c = 0; c < out; ++c) bt[c * in + k] = b[k * out + c];
      Tensor<T>& gx = tape.grad_slot(x.id);
      for (std::size_t r = 0; r < batch; ++r) {
        T* gxr = gx.data().data() + r * in;
        const T* gr = g.data().data() + r * out;
        for (std::size_t c = 0; c < out; ++c) {
          const T gv = gr[c];
          const T* btc = bt.data() + c * in;
          for (std::size_t k = 0; k < in; ++k) gxr[k] += gv * btc[k];
        }
      }
    }
    if (tape.needs_grad(w.id)) {
      Tensor<T>& gw = tape.grad_slot(w.id);
      for (std::size_t r = 0; r < batch; ++r) {
        const T* ar = a.data().data() + r * in;
        const T* gr = g.data().data() + r * out;
        for (std::size_t k = 0; k < in; ++k) {
          const T av = ar[k];
          T* gwk = gw.data().data() + k * out;
          for (std::size_t c = 0; c < out; ++c) gwk[c] += av * gr[c];
        }
      }
    }
  });
}

/// x[b, o] + bias[o], broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  detail::require_rank2(x, "add_bias");
  const Tensor<T>& a = x.value();
  const Tensor<T>& b = bias.value();
  if (b.size() != a.cols())
    throw ShapeError("add_bias: bias " + shape_string(b.shape()) + " does not match " + shape_string(a.shape()));
  Tensor<T> y = a;
  const std::size_t cols = a.cols();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] += b[c];
  return x.tape->push(std::move(y), {x, bias}, [x, bias](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad(self);
    detail::add_into(tape, x, g);
    if (tape.needs_grad(bias.id)) {
      Tensor<T>& gb = tape.grad_slot(bias.id);
      const std::size_t cols = gb.size();
      for (std::size_t r = 0; r < g.size() / cols; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
    }
  });
}

/// sa·a + sb·b for same-shaped operands.
template <typename T>
Var<T> lincomb(T sa, Var<T> a, T sb, Var<T> b) {
  detail::require_same_shape(a, b, "lincomb");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sa * av[i] + sb * bv[i];
  return a.tape->push(std::move(y), {a, b}, [a, b, sa, sb](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad(self);
    if (tape.needs_grad(a.id)) {
      Tensor<T>& ga = tape.grad_slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sa * g[i];
    }
    if (tape.needs_grad(b.id)) {
      Tensor<T>& gb = tape.grad_slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += sb * g[i];
    }
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) { return lincomb(T{1}, a, T{1}, b); }

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) { return lincomb(T{1}, a, T{-1}, b); }

template <typename T>
Var<T> scale(Var<T> a, T s) {
  return detail::unary(a, [s](T v) { return s * v; }, [s](T, T) { return s; });
}

/// Elementwise product.
template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::require_same_shape(a, b, "mul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> y(av.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = av[i] * bv[i];
  return a.tape->push(std::move(y), {a, b}, [a, b](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& av = tape.value(a.id);
    const Tensor<T>& bv = tape.value(b.id);
    if (tape.needs_grad(a.id)) {
      Tensor<T>& ga = tape.grad_slot(a.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.needs_grad(b.id)) {
      Tensor<T>& gb = tape.grad_slot(b.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

/// [a | b] along columns.
template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b) {
  detail::require_rank2(a, "concat_cols");
  detail::require_rank2(b, "concat_cols");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.rows() != bv.rows()) throw ShapeError("concat_cols: row count mismatch");
  const std::size_t rows = av.rows(), ca = av.cols(), cb = bv.cols();
  Tensor<T> y({rows, ca + cb});
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data().data() + r * ca, ca, y.data().data() + r * (ca + cb));
    std::copy_n(bv.data().data() + r * cb, cb, y.data().data() + r * (ca + cb) + ca);
  }
  return a.tape->push(std::move(y), {a, b}, [a, b, ca, cb](Tape<T>& tape, std::size_t self) {
    const Tensor<T>& g = tape.grad(self);
    const std::size_t rows = g.rows();
    if (tape.needs_grad(a.id)) {
      Tensor<T>& ga = tape.grad_slot(a.id);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < ca; ++c) ga[r * ca + c] += g[r * (ca + cb) + c];
    }
    if (tape.needs_grad(b.id)) {
      Tensor<T>& gb = tape.grad_slot(b.id);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cb; ++c) gb[r * cb + c] += g[r * (ca + cb) + ca + c];
    }
  });
}

/// Row lookup: out[i] = table[idx[i]].
template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const std::size_t> idx) {
  detail::require_rank2(table, "gather_rows");
  const Tensor<T>& tv = table.value();
  for (std::size_t i : idx)
    if (i >= tv.rows()) throw std::out_of_range("gather_rows: index " + std::to_string(i) + " out of range");
  Tensor<T> y = tv.gather_rows(idx);
  std::vector<std::size_t> rows(idx.begin(), idx.end());
  return table.tape->push(std::move(y), {table}, [table, rows = std::move(rows)](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(table.id)) return;
    const Tensor<T>& g = tape.grad(self);
    Tensor<T>& gt = tape.grad_slot(table.id);
    const std::size_t cols = gt.cols();
    for (std::size_t i = 0; i < rows.size(); ++i)
      for (std::size_t c = 0; c < cols; ++c) gt[rows[i] * cols + c] += g[i * cols + c];
  });
}

enum class Activation { ELU, Softplus, ReLU };

template <typename T>
T elu(T x) { return x >= T{0} ? x : std::expm1(x); }

/// ln(1 + e^x) without overflow for large |x|.
template <typename T>
T softplus(T x) { return std::max(x, T{0}) + std::log1p(std::exp(-std::abs(x))); }

template <typename T>
T sigmoid(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
Var<T> activation(Activation kind, Var<T> x) {
  switch (kind) {
    case Activation::ELU:
      return detail::unary(x, [](T v) { return elu(v); }, [](T v, T y) { return v >= T{0} ? T{1} : y + T{1}; });
    case Activation::Softplus:
      return detail::unary(x, [](T v) { return softplus(v); }, [](T v, T) { return sigmoid(v); });
    case Activation::ReLU:
      return detail::unary(x, [](T v) { return std::max(v, T{0}); }, [](T v, T) { return v > T{0} ? T{1} : T{0}; });
  }
  throw std::invalid_argument("activation: unknown kind");
}

/// Sum of all elements, as a scalar.
template <typename T>
Var<T> sum(Var<T> a) {
  const Tensor<T>& av = a.value();
  T s{0};
  for (T v : av.data()) s += v;
  return a.tape->push(Tensor<T>::scalar(s), {a}, [a](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(a.id)) return;
    const T g = tape.grad(self)[0];
    Tensor<T>& ga = tape.grad_slot(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

template <typename T>
Var<T> mean(Var<T> a) {
  const T n = static_cast<T>(a.value().size());
  return scale(sum(a), T{1} / n);
}

/// Σ x², as a scalar.
template <typename T>
Var<T> sum_squares(Var<T> a) {
  const Tensor<T>& av = a.value();
  T s{0};
  for (T v : av.data()) s += v * v;
  return a.tape->push(Tensor<T>::scalar(s), {a}, [a](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(a.id)) return;
    const T g = tape.grad(self)[0];
    const Tensor<T>& av = tape.value(a.id);
    Tensor<T>& ga = tape.grad_slot(a.id);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += T{2} * g * av[i];
  });
}

/// (1/B) Σ_b ||pred_b − target_b||² over a [B, n] batch.
template <typename T>
Var<T> mean_squared_norm(Var<T> pred, Var<T> target) {
  detail::require_same_shape(pred, target, "mean_squared_norm");
  const T batch = static_cast<T>(pred.value().rows());
  return scale(sum_squares(sub(pred, target)), T{1} / batch);
}

/// Mean over the batch of −log softmax(scores)[label].
template <typename T>
Var<T> softmax_cross_entropy(Var<T> scores, std::span<const std::size_t> labels) {
  detail::require_rank2(scores, "softmax_cross_entropy");
  const Tensor<T>& s = scores.value();
  const std::size_t batch = s.rows(), classes = s.cols();
  if (labels.size() != batch) throw ShapeError("softmax_cross_entropy: label count does not match batch");
  Tensor<T> probs({batch, classes});
  T loss{0};
  for (std::size_t r = 0; r < batch; ++r) {
    if (labels[r] >= classes) throw std::out_of_range("softmax_cross_entropy: label out of range");
    auto row = s.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T z{0};
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const T lse = mx + std::log(z);
    loss += lse - row[labels[r]];
    for (std::size_t c = 0; c < classes; ++c) probs(r, c) = std::exp(row[c] - lse);
  }
  loss /= static_cast<T>(batch);
  std::vector<std::size_t> lab(labels.begin(), labels.end());
  return scores.tape->push(
      Tensor<T>::scalar(loss), {scores},
      [scores, probs = std::move(probs), lab = std::move(lab)](Tape<T>& tape, std::size_t self) {
        if (!tape.needs_grad(scores.id)) return;
        const T g = tape.grad(self)[0] / static_cast<T>(lab.size());
        Tensor<T>& gs = tape.grad_slot(scores.id);
        const std::size_t classes = probs.cols();
        for (std::size_t r = 0; r < lab.size(); ++r)
          for (std::size_t c = 0; c < classes; ++c)
            gs[r * classes + c] += g * (probs(r, c) - (c == lab[r] ? T{1} : T{0}));
      });
}

/**
 * Batch power normalisation: y = x·k with k = sqrt(power·B / Σ||x_b||²), so the
 * batch-average of ||y_b||² equals `power`.
 */
template <typename T>
Var<T> normalize_power(Var<T> x, T power) {
  detail::require_rank2(x, "normalize_power");
  const Tensor<T>& xv = x.value();
  T ss{0};
  for (T v : xv.data()) ss += v * v;
  if (!(ss > T{0})) throw NumericalError("normalize_power: batch has zero energy");
  const T k = std::sqrt(power * static_cast<T>(xv.rows()) / ss);
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = k * xv[i];
  return x.tape->push(std::move(y), {x}, [x, k, ss](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(x.id)) return;
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& xv = tape.value(x.id);
    T gx_dot{0};
    for (std::size_t i = 0; i < g.size(); ++i) gx_dot += g[i] * xv[i];
    const T coef = k * gx_dot / ss;
    Tensor<T>& gx = tape.grad_slot(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += k * g[i] - coef * xv[i];
  });
}

/// Complex elementwise product of interleaved [re, im] rows with a constant h.
template <typename T>
Var<T> complex_mul(Var<T> x, const Tensor<T>& h) {
  const Tensor<T>& xv = x.value();
  if (xv.shape() != h.shape()) throw ShapeError("complex_mul: shape mismatch");
  if (xv.size() % 2 != 0) throw ShapeError("complex_mul: odd number of real components");
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); i += 2) {
    y[i] = h[i] * xv[i] - h[i + 1] * xv[i + 1];
    y[i + 1] = h[i] * xv[i + 1] + h[i + 1] * xv[i];
  }
  return x.tape->push(std::move(y), {x}, [x, h](Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(x.id)) return;
    const Tensor<T>& g = tape.grad(self);
    Tensor<T>& gx = tape.grad_slot(x.id);
    for (std::size_t i = 0; i < g.size(); i += 2) {
      // Multiplication by conj(h).
      gx[i] += h[i] * g[i] + h[i + 1] * g[i + 1];
      gx[i + 1] += -h[i + 1] * g[i] + h[i] * g[i + 1];
    }
  });
}

}  // namespace dmchan::nn
