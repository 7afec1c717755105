// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable tensor operations. Signals are [channels x time] matrices;
// vectors are rank-1. Each op validates shapes and records its backward pass
// through ad::make_op.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "gcbase/autograd.hpp"
#include "gcbase/kernels.hpp"
#include "gcbase/tensor.hpp"

namespace gcbase::ops {

using ad::Node;
using ad::Var;

namespace detail {

template <typename T>
Tensor<T>* grad_of(Node<T>& n) {
  return n.requires_grad ? &n.ensure_grad() : nullptr;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

template <typename T>
void require_matrix(const Var<T>& x, const char* op) {
  require(x.value().rank() == 2, std::string(op) + ": expected a [C x T] matrix, got " + shape_str(x.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  require_shape(b.shape(), a.shape(), "add");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return ad::make_op<T>(std::move(y), {a, b}, [](Node<T>& self) {
    for (int k = 0; k < 2; ++k)
      if (auto* g = detail::grad_of(*self.parents[k]))
        kernels::axpy(T(1), self.grad.data(), g->data(), g->size());
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  require_shape(b.shape(), a.shape(), "sub");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return ad::make_op<T>(std::move(y), {a, b}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0])) kernels::axpy(T(1), self.grad.data(), g->data(), g->size());
    if (auto* g = detail::grad_of(*self.parents[1])) kernels::axpy(T(-1), self.grad.data(), g->data(), g->size());
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  require_shape(b.shape(), a.shape(), "mul");
  Tensor<T> y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return ad::make_op<T>(std::move(y), {a, b}, [](Node<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (auto* g = detail::grad_of(pa))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * pb.value[i];
    if (auto* g = detail::grad_of(pb))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * pa.value[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T c) {
  Tensor<T> y = a.value();
  for (auto& v : y.storage()) v *= c;
  return ad::make_op<T>(std::move(y), {a}, [c](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0])) kernels::axpy(c, self.grad.data(), g->data(), g->size());
  });
}

template <typename T>
Var<T> add_scalar(const Var<T>& a, T c) {
  Tensor<T> y = a.value();
  for (auto& v : y.storage()) v += c;
  return ad::make_op<T>(std::move(y), {a}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0])) kernels::axpy(T(1), self.grad.data(), g->data(), g->size());
  });
}

/// Average of equally-shaped inputs.
template <typename T>
Var<T> mean_n(const std::vector<Var<T>>& xs) {
  detail::require(!xs.empty(), "mean_n: no inputs");
  Tensor<T> y = xs[0].value();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    require_shape(xs[k].shape(), y.shape(), "mean_n");
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += xs[k].value()[i];
  }
  const T inv = T(1) / static_cast<T>(xs.size());
  for (auto& v : y.storage()) v *= inv;
  return ad::make_op<T>(std::move(y), xs, [inv](Node<T>& self) {
    for (auto& p : self.parents)
      if (auto* g = detail::grad_of(*p)) kernels::axpy(inv, self.grad.data(), g->data(), g->size());
  });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tensor<T> y = x.value();
  for (auto& v : y.storage()) v = v > T(0) ? v : T(0);
  return ad::make_op<T>(std::move(y), {x}, [](Node<T>& self) {
    auto& p = *self.parents[0];
    if (auto* g = detail::grad_of(p))
      for (std::size_t i = 0; i < g->size(); ++i)
        if (p.value[i] > T(0)) (*g)[i] += self.grad[i];
  });
}

/// PReLU with a single learnable slope (shape [1]).
template <typename T>
Var<T> prelu(const Var<T>& x, const Var<T>& slope) {
  detail::require(slope.value().size() == 1, "prelu: slope must have one element");
  const T a = slope.value()[0];
  Tensor<T> y = x.value();
  for (auto& v : y.storage()) v = v > T(0) ? v : a * v;
  return ad::make_op<T>(std::move(y), {x, slope}, [a](Node<T>& self) {
    auto& px = *self.parents[0];
    if (auto* g = detail::grad_of(px))
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += px.value[i] > T(0) ? self.grad[i] : a * self.grad[i];
    if (auto* g = detail::grad_of(*self.parents[1])) {
      T acc = T(0);
      for (std::size_t i = 0; i < px.value.size(); ++i)
        if (!(px.value[i] > T(0))) acc += self.grad[i] * px.value[i];
      (*g)[0] += acc;
    }
  });
}

template <typename T>
T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> y = x.value();
  for (auto& v : y.storage()) v = sigmoid_scalar(v);
  return ad::make_op<T>(std::move(y), {x}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0]))
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T s = self.value[i];
        (*g)[i] += self.grad[i] * s * (T(1) - s);
      }
  });
}

template <typename T>
Var<T> softmax(const Var<T>& x) {
  detail::require(x.value().rank() == 1, "softmax: expected a vector");
  Tensor<T> y = x.value();
  const T mx = *std::max_element(y.storage().begin(), y.storage().end());
  T z = T(0);
  for (auto& v : y.storage()) z += (v = std::exp(v - mx));
  for (auto& v : y.storage()) v /= z;
  return ad::make_op<T>(std::move(y), {x}, [](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0])) {
      const T inner = kernels::dot(self.value.data(), self.grad.data(), self.value.size());
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.value[i] * (self.grad[i] - inner);
    }
  });
}

// --------------------------------------------------------------- convolution

/// 1x1 convolution: y = W x + b, with W [Co x Ci], x [Ci x T], b [Co] or undefined.
template <typename T>
Var<T> pointwise_conv(const Var<T>& x, const Var<T>& w, const Var<T>& b = {}) {
  detail::require_matrix(x, "pointwise_conv");
  const std::size_t ci = x.value().dim(0), t = x.value().dim(1);
  detail::require(w.value().rank() == 2 && w.value().dim(1) == ci,
                  "pointwise_conv: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  const std::size_t co = w.value().dim(0);
  Tensor<T> y({co, t});
  if (b.defined()) {
    require_shape(b.shape(), {co}, "pointwise_conv bias");
    for (std::size_t r = 0; r < co; ++r) std::fill_n(y.data() + r * t, t, b.value()[r]);
  }
  kernels::gemm_nn(co, t, ci, w.value().data(), x.value().data(), y.data());
  std::vector<Var<T>> in{x, w};
  if (b.defined()) in.push_back(b);
  return ad::make_op<T>(std::move(y), std::move(in), [ci, co, t](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    const T* dy = self.grad.data();
    if (auto* g = detail::grad_of(px)) kernels::gemm_tn(ci, t, co, pw.value.data(), dy, g->data());
    if (auto* g = detail::grad_of(pw)) kernels::gemm_nt(co, ci, t, dy, px.value.data(), g->data());
    if (self.parents.size() > 2)
      if (auto* g = detail::grad_of(*self.parents[2]))
        for (std::size_t r = 0; r < co; ++r) (*g)[r] += kernels::sum(dy + r * t, t);
  });
}

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t pad_left = 0;
  std::size_t pad_right = 0;

  std::size_t out_length(std::size_t t, std::size_t k) const {
    const std::size_t span = dilation * (k - 1) + 1;
    const std::size_t padded = t + pad_left + pad_right;
    if (padded < span) return 0;
    return (padded - span) / stride + 1;
  }
};

namespace detail {

// col[(c*K + k) x To] = x[c, t*stride + k*dilation - pad_left], zero outside.
template <typename T>
void im2col(const T* x, std::size_t ci, std::size_t t, std::size_t k, std::size_t to, const ConvGeometry& g, T* col) {
  for (std::size_t c = 0; c < ci; ++c)
    for (std::size_t kk = 0; kk < k; ++kk) {
      T* dst = col + (c * k + kk) * to;
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk * g.dilation) - static_cast<std::ptrdiff_t>(g.pad_left);
      for (std::size_t o = 0; o < to; ++o) {
        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(o * g.stride) + off;
        dst[o] = (src >= 0 && src < static_cast<std::ptrdiff_t>(t)) ? x[c * t + src] : T(0);
      }
    }
}

template <typename T>
void col2im(const T* col, std::size_t ci, std::size_t t, std::size_t k, std::size_t to, const ConvGeometry& g, T* x) {
  for (std::size_t c = 0; c < ci; ++c)
    for (std::size_t kk = 0; kk < k; ++kk) {
      const T* src = col + (c * k + kk) * to;
      const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk * g.dilation) - static_cast<std::ptrdiff_t>(g.pad_left);
      for (std::size_t o = 0; o < to; ++o) {
        const std::ptrdiff_t dst = static_cast<std::ptrdiff_t>(o * g.stride) + off;
        if (dst >= 0 && dst < static_cast<std::ptrdiff_t>(t)) x[c * t + dst] += src[o];
      }
    }
}

}  // namespace detail

/// Dense 1-D convolution. w is [Co x Ci x K]; b is [Co] or undefined.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, ConvGeometry geo) {
  detail::require_matrix(x, "conv1d");
  detail::require(w.value().rank() == 3 && w.value().dim(1) == x.value().dim(0),
                  "conv1d: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  detail::require(geo.stride >= 1 && geo.dilation >= 1, "conv1d: stride and dilation must be positive");
  const std::size_t ci = x.value().dim(0), t = x.value().dim(1);
  const std::size_t co = w.value().dim(0), k = w.value().dim(2);
  const std::size_t to = geo.out_length(t, k);
  detail::require(to > 0, "conv1d: input of length " + std::to_string(t) + " shorter than the kernel span");

  std::vector<T> col(ci * k * to);
  detail::im2col(x.value().data(), ci, t, k, to, geo, col.data());
  Tensor<T> y({co, to});
  if (b.defined()) {
    require_shape(b.shape(), {co}, "conv1d bias");
    for (std::size_t r = 0; r < co; ++r) std::fill_n(y.data() + r * to, to, b.value()[r]);
  }
  kernels::gemm_nn(co, to, ci * k, w.value().data(), col.data(), y.data());

  std::vector<Var<T>> in{x, w};
  if (b.defined()) in.push_back(b);
  return ad::make_op<T>(std::move(y), std::move(in),
                        [col = std::move(col), ci, t, co, k, to, geo](Node<T>& self) {
                          auto& px = *self.parents[0];
                          auto& pw = *self.parents[1];
                          const T* dy = self.grad.data();
                          if (auto* g = detail::grad_of(px)) {
                            std::vector<T> dcol(ci * k * to, T(0));
                            kernels::gemm_tn(ci * k, to, co, pw.value.data(), dy, dcol.data());
                            detail::col2im(dcol.data(), ci, t, k, to, geo, g->data());
                          }
                          if (auto* g = detail::grad_of(pw)) kernels::gemm_nt(co, ci * k, to, dy, col.data(), g->data());
                          if (self.parents.size() > 2)
                            if (auto* g = detail::grad_of(*self.parents[2]))
                              for (std::size_t r = 0; r < co; ++r) (*g)[r] += kernels::sum(dy + r * to, to);
                        });
}

/// Per-channel (depthwise) convolution, stride 1. w is [C x K], b is [C].
template <typename T>
Var<T> depthwise_conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::size_t dilation, std::size_t pad_left,
                        std::size_t pad_right) {
  detail::require_matrix(x, "depthwise_conv1d");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1);
  detail::require(w.value().rank() == 2 && w.value().dim(0) == c,
                  "depthwise_conv1d: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  const std::size_t k = w.value().dim(1);
  const ConvGeometry geo{1, dilation, pad_left, pad_right};
  const std::size_t to = geo.out_length(t, k);
  detail::require(to > 0, "depthwise_conv1d: input shorter than the kernel span");

  // For output o and tap kk the source index is o + kk*d - pad_left.
  auto tap_range = [=](std::size_t kk, std::size_t& o0, std::size_t& o1, std::ptrdiff_t& off) {
    off = static_cast<std::ptrdiff_t>(kk * dilation) - static_cast<std::ptrdiff_t>(pad_left);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -off);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(to), static_cast<std::ptrdiff_t>(t) - off);
    o0 = static_cast<std::size_t>(lo);
    o1 = static_cast<std::size_t>(std::max(lo, hi));
  };

  Tensor<T> y({c, to});
  const T* xv = x.value().data();
  const T* wv = w.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    T* yr = y.data() + ch * to;
    if (b.defined()) std::fill_n(yr, to, b.value()[ch]);
    for (std::size_t kk = 0; kk < k; ++kk) {
      std::size_t o0, o1;
      std::ptrdiff_t off;
      tap_range(kk, o0, o1, off);
      if (o1 > o0) kernels::axpy(wv[ch * k + kk], xv + ch * t + (static_cast<std::ptrdiff_t>(o0) + off), yr + o0, o1 - o0);
    }
  }

  std::vector<Var<T>> in{x, w};
  if (b.defined()) {
    require_shape(b.shape(), {c}, "depthwise_conv1d bias");
    in.push_back(b);
  }
  return ad::make_op<T>(std::move(y), std::move(in), [c, t, k, to, tap_range](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto* gx = detail::grad_of(px);
    auto* gw = detail::grad_of(pw);
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* dy = self.grad.data() + ch * to;
      for (std::size_t kk = 0; kk < k; ++kk) {
        std::size_t o0, o1;
        std::ptrdiff_t off;
        tap_range(kk, o0, o1, off);
        if (o1 <= o0) continue;
        const std::size_t src = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(o0) + off);
        if (gx) kernels::axpy(pw.value[ch * k + kk], dy + o0, gx->data() + ch * t + src, o1 - o0);
        if (gw) (*gw)[ch * k + kk] += kernels::dot(dy + o0, px.value.data() + ch * t + src, o1 - o0);
      }
    }
    if (self.parents.size() > 2)
      if (auto* g = detail::grad_of(*self.parents[2]))
        for (std::size_t ch = 0; ch < c; ++ch) (*g)[ch] += kernels::sum(self.grad.data() + ch * to, to);
  });
}

/// Transposed convolution (overlap-add). w is [Ci x Co x K]; output length
/// is (F - 1) * stride + K.
template <typename T>
Var<T> conv_transpose1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, std::size_t stride) {
  detail::require_matrix(x, "conv_transpose1d");
  detail::require(w.value().rank() == 3 && w.value().dim(0) == x.value().dim(0),
                  "conv_transpose1d: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  const std::size_t ci = x.value().dim(0), f = x.value().dim(1);
  const std::size_t co = w.value().dim(1), k = w.value().dim(2);
  detail::require(f >= 1 && stride >= 1, "conv_transpose1d: empty input");
  const std::size_t to = (f - 1) * stride + k;
  const ConvGeometry geo{stride, 1, 0, 0};

  // col[(co*K + k) x F] = W^T x, then scatter-add into the output.
  std::vector<T> col(co * k * f, T(0));
  kernels::gemm_tn(co * k, f, ci, w.value().data(), x.value().data(), col.data());
  Tensor<T> y({co, to});
  if (b.defined()) {
    require_shape(b.shape(), {co}, "conv_transpose1d bias");
    for (std::size_t r = 0; r < co; ++r) std::fill_n(y.data() + r * to, to, b.value()[r]);
  }
  detail::col2im(col.data(), co, to, k, f, geo, y.data());

  std::vector<Var<T>> in{x, w};
  if (b.defined()) in.push_back(b);
  return ad::make_op<T>(std::move(y), std::move(in), [ci, f, co, k, to, geo](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    std::vector<T> dcol(co * k * f);
    detail::im2col(self.grad.data(), co, to, k, f, geo, dcol.data());
    if (auto* g = detail::grad_of(px)) kernels::gemm_nn(ci, f, co * k, pw.value.data(), dcol.data(), g->data());
    if (auto* g = detail::grad_of(pw)) kernels::gemm_nt(ci, co * k, f, px.value.data(), dcol.data(), g->data());
    if (self.parents.size() > 2)
      if (auto* g = detail::grad_of(*self.parents[2]))
        for (std::size_t r = 0; r < co; ++r) (*g)[r] += kernels::sum(self.grad.data() + r * to, to);
  });
}

// ------------------------------------------------------------- normalization

/// Global layer normalization over the whole [C x T] input with per-channel
/// gain and bias.
template <typename T>
Var<T> global_layer_norm(const Var<T>& x, const Var<T>& gain, const Var<T>& bias, T eps = T(1e-8)) {
  detail::require_matrix(x, "global_layer_norm");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1), n = c * t;
  require_shape(gain.shape(), {c}, "global_layer_norm gain");
  require_shape(bias.shape(), {c}, "global_layer_norm bias");
  const T* xv = x.value().data();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += xv[i];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += (xv[i] - mean) * (xv[i] - mean);
  var /= static_cast<double>(n);
  const T inv_std = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
  const T mu = static_cast<T>(mean);

  Tensor<T> xhat({c, t});
  Tensor<T> y({c, t});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T ga = gain.value()[ch], be = bias.value()[ch];
    for (std::size_t i = ch * t; i < (ch + 1) * t; ++i) {
      xhat[i] = (xv[i] - mu) * inv_std;
      y[i] = ga * xhat[i] + be;
    }
  }
  return ad::make_op<T>(std::move(y), {x, gain, bias}, [xhat = std::move(xhat), c, t, n, inv_std](Node<T>& self) {
    const T* dy = self.grad.data();
    auto& pg = *self.parents[1];
    if (auto* g = detail::grad_of(pg))
      for (std::size_t ch = 0; ch < c; ++ch) (*g)[ch] += kernels::dot(dy + ch * t, xhat.data() + ch * t, t);
    if (auto* g = detail::grad_of(*self.parents[2]))
      for (std::size_t ch = 0; ch < c; ++ch) (*g)[ch] += kernels::sum(dy + ch * t, t);
    if (auto* g = detail::grad_of(*self.parents[0])) {
      double s1 = 0.0, s2 = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T ga = pg.value[ch];
        for (std::size_t i = ch * t; i < (ch + 1) * t; ++i) {
          const double gh = static_cast<double>(dy[i]) * ga;
          s1 += gh;
          s2 += gh * xhat[i];
        }
      }
      const T m1 = static_cast<T>(s1 / static_cast<double>(n));
      const T m2 = static_cast<T>(s2 / static_cast<double>(n));
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T ga = pg.value[ch];
        for (std::size_t i = ch * t; i < (ch + 1) * t; ++i)
          (*g)[i] += inv_std * (dy[i] * ga - m1 - xhat[i] * m2);
      }
    }
  });
}

// ----------------------------------------------------------- reshaping etc.

/// Mean over the time axis: [C x T] -> [C].
template <typename T>
Var<T> time_mean(const Var<T>& x) {
  detail::require_matrix(x, "time_mean");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1);
  detail::require(t > 0, "time_mean: empty time axis");
  Tensor<T> y({c});
  for (std::size_t ch = 0; ch < c; ++ch) y[ch] = kernels::sum(x.value().data() + ch * t, t) / static_cast<T>(t);
  return ad::make_op<T>(std::move(y), {x}, [c, t](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0])) {
      const T inv = T(1) / static_cast<T>(t);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T v = self.grad[ch] * inv;
        T* row = g->data() + ch * t;
        for (std::size_t i = 0; i < t; ++i) row[i] += v;
      }
    }
  });
}

/// Dense layer on a vector: y = W x + b, W [Co x Ci].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b = {}) {
  detail::require(x.value().rank() == 1, "linear: expected a vector input");
  const std::size_t ci = x.value().dim(0);
  detail::require(w.value().rank() == 2 && w.value().dim(1) == ci,
                  "linear: weight " + shape_str(w.shape()) + " incompatible with input " + shape_str(x.shape()));
  const std::size_t co = w.value().dim(0);
  Tensor<T> y({co});
  for (std::size_t r = 0; r < co; ++r)
    y[r] = kernels::dot(w.value().data() + r * ci, x.value().data(), ci) + (b.defined() ? b.value()[r] : T(0));
  std::vector<Var<T>> in{x, w};
  if (b.defined()) {
    require_shape(b.shape(), {co}, "linear bias");
    in.push_back(b);
  }
  return ad::make_op<T>(std::move(y), std::move(in), [ci, co](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    if (auto* g = detail::grad_of(px))
      for (std::size_t r = 0; r < co; ++r) kernels::axpy(self.grad[r], pw.value.data() + r * ci, g->data(), ci);
    if (auto* g = detail::grad_of(pw))
      for (std::size_t r = 0; r < co; ++r) kernels::axpy(self.grad[r], px.value.data(), g->data() + r * ci, ci);
    if (self.parents.size() > 2)
      if (auto* g = detail::grad_of(*self.parents[2]))
        for (std::size_t r = 0; r < co; ++r) (*g)[r] += self.grad[r];
  });
}

/// Convex combination of equally-shaped branches: sum_b w[b] * branch[b].
/// Accumulation starts from the first weighted term, so a single branch with
/// weight 1 reproduces its input exactly.
template <typename T>
Var<T> weighted_sum(const Var<T>& weights, const std::vector<Var<T>>& branches) {
  detail::require(weights.value().rank() == 1 && weights.value().dim(0) == branches.size() && !branches.empty(),
                  "weighted_sum: weight count must match branch count");
  Tensor<T> y = branches[0].value();
  const T w0 = weights.value()[0];
  for (auto& v : y.storage()) v *= w0;
  for (std::size_t b = 1; b < branches.size(); ++b) {
    require_shape(branches[b].shape(), y.shape(), "weighted_sum branch");
    kernels::axpy(weights.value()[b], branches[b].value().data(), y.data(), y.size());
  }
  std::vector<Var<T>> in{weights};
  in.insert(in.end(), branches.begin(), branches.end());
  return ad::make_op<T>(std::move(y), std::move(in), [](Node<T>& self) {
    auto& pw = *self.parents[0];
    auto* gw = detail::grad_of(pw);
    for (std::size_t b = 1; b < self.parents.size(); ++b) {
      auto& pb = *self.parents[b];
      if (gw) (*gw)[b - 1] += kernels::dot(self.grad.data(), pb.value.data(), self.grad.size());
      if (auto* g = detail::grad_of(pb)) kernels::axpy(pw.value[b - 1], self.grad.data(), g->data(), g->size());
    }
  });
}

/// Concatenates vectors end to end.
template <typename T>
Var<T> concat(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat: no inputs");
  std::vector<T> out;
  for (const auto& p : parts) {
    detail::require(p.value().rank() == 1, "concat: expected vectors");
    out.insert(out.end(), p.value().storage().begin(), p.value().storage().end());
  }
  const std::size_t n = out.size();
  return ad::make_op<T>(Tensor<T>({n}, std::move(out)), parts, [](Node<T>& self) {
    std::size_t off = 0;
    for (auto& p : self.parents) {
      const std::size_t len = p->value.size();
      if (auto* g = detail::grad_of(*p)) kernels::axpy(T(1), self.grad.data() + off, g->data(), len);
      off += len;
    }
  });
}

/// Scales row c of a [C x T] matrix by s[c].
template <typename T>
Var<T> scale_rows(const Var<T>& x, const Var<T>& s) {
  detail::require_matrix(x, "scale_rows");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1);
  detail::require(s.value().rank() == 1 && s.value().dim(0) == c,
                  "scale_rows: gate length " + shape_str(s.shape()) + " does not match " + std::to_string(c) + " rows");
  Tensor<T> y = x.value();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < t; ++i) y(ch, i) *= s.value()[ch];
  return ad::make_op<T>(std::move(y), {x, s}, [c, t](Node<T>& self) {
    auto& px = *self.parents[0];
    auto& ps = *self.parents[1];
    if (auto* g = detail::grad_of(px))
      for (std::size_t ch = 0; ch < c; ++ch) kernels::axpy(ps.value[ch], self.grad.data() + ch * t, g->data() + ch * t, t);
    if (auto* g = detail::grad_of(ps))
      for (std::size_t ch = 0; ch < c; ++ch) (*g)[ch] += kernels::dot(self.grad.data() + ch * t, px.value.data() + ch * t, t);
  });
}

/// Fixed linear interpolation along time. Output column j blends input
/// columns lo[j] and lo[j]+1 (clamped) with weight frac[j] on the latter.
struct InterpolationMap {
  std::size_t in_length = 0;
  std::vector<std::size_t> lo;
  std::vector<double> frac;

  /// Maps output position j to fractional input position positions[j].
  static InterpolationMap from_positions(std::size_t in_length, const std::vector<double>& positions) {
    if (in_length == 0) throw ShapeError("interpolation from an empty sequence");
    InterpolationMap m;
    m.in_length = in_length;
    const double last = static_cast<double>(in_length - 1);
    for (double p : positions) {
      p = std::clamp(p, 0.0, last);
      auto i = static_cast<std::size_t>(std::floor(p));
      if (i >= in_length - 1) {
        i = in_length - 1;
        p = static_cast<double>(i);
      }
      m.lo.push_back(i);
      m.frac.push_back(p - static_cast<double>(i));
    }
    return m;
  }
  std::size_t out_length() const { return lo.size(); }
};

template <typename T>
Var<T> interpolate_time(const Var<T>& x, const InterpolationMap& map) {
  detail::require_matrix(x, "interpolate_time");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1), to = map.out_length();
  detail::require(t == map.in_length, "interpolate_time: map built for length " + std::to_string(map.in_length) +
                                          ", input has " + std::to_string(t));
  Tensor<T> y({c, to});
  for (std::size_t ch = 0; ch < c; ++ch) {
    const T* xr = x.value().data() + ch * t;
    T* yr = y.data() + ch * to;
    for (std::size_t j = 0; j < to; ++j) {
      const std::size_t i0 = map.lo[j], i1 = std::min(i0 + 1, t - 1);
      const T f = static_cast<T>(map.frac[j]);
      yr[j] = (T(1) - f) * xr[i0] + f * xr[i1];
    }
  }
  return ad::make_op<T>(std::move(y), {x}, [map, c, t, to](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0]))
      for (std::size_t ch = 0; ch < c; ++ch) {
        T* gr = g->data() + ch * t;
        const T* dy = self.grad.data() + ch * to;
        for (std::size_t j = 0; j < to; ++j) {
          const std::size_t i0 = map.lo[j], i1 = std::min(i0 + 1, t - 1);
          const T f = static_cast<T>(map.frac[j]);
          gr[i0] += (T(1) - f) * dy[j];
          gr[i1] += f * dy[j];
        }
      }
  });
}

/// Pads with zeros or truncates the time axis to exactly `length` samples.
template <typename T>
Var<T> fit_length(const Var<T>& x, std::size_t length) {
  detail::require_matrix(x, "fit_length");
  const std::size_t c = x.value().dim(0), t = x.value().dim(1), keep = std::min(t, length);
  Tensor<T> y({c, length});
  for (std::size_t ch = 0; ch < c; ++ch) std::copy_n(x.value().data() + ch * t, keep, y.data() + ch * length);
  return ad::make_op<T>(std::move(y), {x}, [c, t, length, keep](Node<T>& self) {
    if (auto* g = detail::grad_of(*self.parents[0]))
      for (std::size_t ch = 0; ch < c; ++ch)
        kernels::axpy(T(1), self.grad.data() + ch * length, g->data() + ch * t, keep);
  });
}

// ----------------------------------------------------------------- attention

/// Attention weights of one query frame over a contiguous key range.
template <typename T>
struct AttentionRow {
  std::size_t first = 0;
  std::vector<T> weights;
};

namespace detail {

template <typename T>
Tensor<T> transpose(const Tensor<T>& m) {
  const std::size_t r = m.dim(0), c = m.dim(1);
  Tensor<T> out({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = m[i * c + j];
  return out;
}

// qt [F x d], kt [F' x d], time-major.
template <typename T>
std::vector<AttentionRow<T>> attention_rows(const Tensor<T>& qt, const Tensor<T>& kt, int window) {
  const std::size_t f = qt.dim(0), fk = kt.dim(0), d = qt.dim(1);
  const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(d));
  std::vector<AttentionRow<T>> rows(f);
  for (std::size_t i = 0; i < f; ++i) {
    std::size_t j0 = 0, j1 = fk;
    if (window >= 0) {
      const auto w = static_cast<std::size_t>(window);
      j0 = i > w ? i - w : 0;
      j1 = std::min(fk, i + w + 1);
      if (j0 >= j1) {  // query beyond the key range: attend to the nearest key
        j0 = fk - 1;
        j1 = fk;
      }
    }
    auto& row = rows[i];
    row.first = j0;
    row.weights.resize(j1 - j0);
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = j0; j < j1; ++j) {
      const T s = kernels::dot(qt.data() + i * d, kt.data() + j * d, d) * inv_sqrt;
      row.weights[j - j0] = s;
      mx = std::max(mx, s);
    }
    T z = T(0);
    for (auto& v : row.weights) z += (v = std::exp(v - mx));
    for (auto& v : row.weights) v /= z;
  }
  return rows;
}

}  // namespace detail

/// Scaled dot-product attention along time. q is [d x F]; k [d x F'] and v
/// [dv x F'] share their time axis. With window >= 0 query i only sees keys
/// within |i - j| <= window; a negative window attends over all keys.
/// Output is [dv x F]; each query's weights are non-negative and sum to one.
template <typename T>
Var<T> attention(const Var<T>& q, const Var<T>& k, const Var<T>& v, int window,
                 std::vector<AttentionRow<T>>* trace = nullptr) {
  detail::require_matrix(q, "attention query");
  detail::require_matrix(k, "attention key");
  detail::require_matrix(v, "attention value");
  detail::require(k.value().dim(0) == q.value().dim(0), "attention: query/key feature sizes differ");
  detail::require(v.value().dim(1) == k.value().dim(1), "attention: key/value lengths differ");
  detail::require(k.value().dim(1) > 0, "attention: no keys");
  const std::size_t d = q.value().dim(0), f = q.value().dim(1), fk = k.value().dim(1), dv = v.value().dim(0);

  Tensor<T> qt = detail::transpose(q.value());
  Tensor<T> kt = detail::transpose(k.value());
  Tensor<T> vt = detail::transpose(v.value());
  auto rows = detail::attention_rows(qt, kt, window);

  Tensor<T> yt({f, dv});
  for (std::size_t i = 0; i < f; ++i) {
    const auto& r = rows[i];
    for (std::size_t j = 0; j < r.weights.size(); ++j)
      kernels::axpy(r.weights[j], vt.data() + (r.first + j) * dv, yt.data() + i * dv, dv);
  }
  if (trace) *trace = rows;

  return ad::make_op<T>(detail::transpose(yt), {q, k, v},
                        [qt = std::move(qt), kt = std::move(kt), vt = std::move(vt), rows = std::move(rows), d, f, fk,
                         dv](Node<T>& self) {
                          auto* gq = detail::grad_of(*self.parents[0]);
                          auto* gk = detail::grad_of(*self.parents[1]);
                          auto* gv = detail::grad_of(*self.parents[2]);
                          const Tensor<T> dyt = detail::transpose(self.grad);
                          Tensor<T> dqt({f, d}), dkt({fk, d}), dvt({fk, dv});
                          const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(d));
                          std::vector<T> da;
                          for (std::size_t i = 0; i < f; ++i) {
                            const auto& r = rows[i];
                            const T* dyi = dyt.data() + i * dv;
                            da.assign(r.weights.size(), T(0));
                            T inner = T(0);
                            for (std::size_t j = 0; j < r.weights.size(); ++j) {
                              const std::size_t kj = r.first + j;
                              da[j] = kernels::dot(dyi, vt.data() + kj * dv, dv);
                              inner += r.weights[j] * da[j];
                              if (gv) kernels::axpy(r.weights[j], dyi, dvt.data() + kj * dv, dv);
                            }
                            for (std::size_t j = 0; j < r.weights.size(); ++j) {
                              const std::size_t kj = r.first + j;
                              const T ds = r.weights[j] * (da[j] - inner) * inv_sqrt;
                              if (gq) kernels::axpy(ds, kt.data() + kj * d, dqt.data() + i * d, d);
                              if (gk) kernels::axpy(ds, qt.data() + i * d, dkt.data() + kj * d, d);
                            }
                          }
                          auto add_t = [](Tensor<T>* g, const Tensor<T>& gt) {
                            const Tensor<T> back = detail::transpose(gt);
                            kernels::axpy(T(1), back.data(), g->data(), g->size());
                          };
                          if (gq) add_t(gq, dqt);
                          if (gk) add_t(gk, dkt);
                          if (gv) add_t(gv, dvt);
                        });
}

}  // namespace gcbase::ops
