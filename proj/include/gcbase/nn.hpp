// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Trainable layers built on the ops in ops.hpp. Layers own named Parameters
// and expose them through `collect()`; forward passes bind the parameters into
// the current graph.

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gcbase/autograd.hpp"
#include "gcbase/ops.hpp"
#include "gcbase/random.hpp"

namespace gcbase::nn {

template <typename T>
using ParamList = std::vector<ad::Parameter<T>*>;

template <typename T>
using Var = ad::Var<T>;

/// Fills `p` with U(-bound, bound).
template <typename T>
void uniform_init(ad::Parameter<T>& p, double bound, Rng& rng) {
  for (auto& v : p.value.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += p->value.size();
  return n;
}

template <typename T>
class Conv1x1 {
 public:
  Conv1x1() = default;
  Conv1x1(const std::string& name, std::size_t in, std::size_t out, bool bias, Rng& rng)
      : weight_(name + ".weight", Tensor<T>({out, in})), has_bias_(bias) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_init(weight_, bound, rng);
    if (bias) {
      bias_ = ad::Parameter<T>(name + ".bias", Tensor<T>({out}));
      uniform_init(bias_, bound, rng);
    }
  }

  Var<T> operator()(const Var<T>& x) {
    return ops::pointwise_conv(x, ad::bind(weight_), has_bias_ ? ad::bind(bias_) : Var<T>{});
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }
  ad::Parameter<T>& weight() { return weight_; }
  ad::Parameter<T>& bias() { return bias_; }

 private:
  ad::Parameter<T> weight_;
  ad::Parameter<T> bias_;
  bool has_bias_ = false;
};

template <typename T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(const std::string& name, std::size_t in, std::size_t out, std::size_t kernel, ops::ConvGeometry geo, bool bias,
         Rng& rng)
      : weight_(name + ".weight", Tensor<T>({out, in, kernel})), has_bias_(bias), geo_(geo) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in * kernel));
    uniform_init(weight_, bound, rng);
    if (bias) {
      bias_ = ad::Parameter<T>(name + ".bias", Tensor<T>({out}));
      uniform_init(bias_, bound, rng);
    }
  }

  Var<T> operator()(const Var<T>& x) {
    return ops::conv1d(x, ad::bind(weight_), has_bias_ ? ad::bind(bias_) : Var<T>{}, geo_);
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }
  const ops::ConvGeometry& geometry() const { return geo_; }
  std::size_t kernel() const { return weight_.value.dim(2); }

 private:
  ad::Parameter<T> weight_;
  ad::Parameter<T> bias_;
  bool has_bias_ = false;
  ops::ConvGeometry geo_;
};

/// Depthwise temporal convolution with "same" output length.
template <typename T>
class DepthwiseConv {
 public:
  DepthwiseConv() = default;
  DepthwiseConv(const std::string& name, std::size_t channels, std::size_t kernel, std::size_t dilation, Rng& rng)
      : weight_(name + ".weight", Tensor<T>({channels, kernel})),
        bias_(name + ".bias", Tensor<T>({channels})),
        dilation_(dilation) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kernel));
    uniform_init(weight_, bound, rng);
    uniform_init(bias_, bound, rng);
  }

  Var<T> operator()(const Var<T>& x) {
    const std::size_t span = dilation_ * (weight_.value.dim(1) - 1);
    return ops::depthwise_conv1d(x, ad::bind(weight_), ad::bind(bias_), dilation_, span / 2, span - span / 2);
  }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  std::size_t dilation() const { return dilation_; }
  ad::Parameter<T>& weight() { return weight_; }
  ad::Parameter<T>& bias() { return bias_; }

 private:
  ad::Parameter<T> weight_;
  ad::Parameter<T> bias_;
  std::size_t dilation_ = 1;
};

template <typename T>
class GlobalLayerNorm {
 public:
  GlobalLayerNorm() = default;
  GlobalLayerNorm(const std::string& name, std::size_t channels)
      : gain_(name + ".gain", Tensor<T>({channels}, T(1))), bias_(name + ".bias", Tensor<T>({channels})) {}

  Var<T> operator()(const Var<T>& x) { return ops::global_layer_norm(x, ad::bind(gain_), ad::bind(bias_)); }

  void collect(ParamList<T>& out) {
    out.push_back(&gain_);
    out.push_back(&bias_);
  }

 private:
  ad::Parameter<T> gain_;
  ad::Parameter<T> bias_;
};

template <typename T>
class PReLU {
 public:
  PReLU() = default;
  explicit PReLU(const std::string& name) : slope_(name + ".slope", Tensor<T>({1}, T(0.25))) {}

  Var<T> operator()(const Var<T>& x) { return ops::prelu(x, ad::bind(slope_)); }
  void collect(ParamList<T>& out) { out.push_back(&slope_); }

 private:
  ad::Parameter<T> slope_;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
      : weight_(name + ".weight", Tensor<T>({out, in})), bias_(name + ".bias", Tensor<T>({out})) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    uniform_init(weight_, bound, rng);
    uniform_init(bias_, bound, rng);
  }

  Var<T> operator()(const Var<T>& x) { return ops::linear(x, ad::bind(weight_), ad::bind(bias_)); }
  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }
  ad::Parameter<T>& weight() { return weight_; }
  ad::Parameter<T>& bias() { return bias_; }

 private:
  ad::Parameter<T> weight_;
  ad::Parameter<T> bias_;
};

/// Standard depthwise-separable TCN block:
///   x + P2(gLN(PReLU(D(gLN(PReLU(P1 x))))))
/// where P1/P2 are 1x1 convolutions and D is a dilated depthwise convolution.
template <typename T>
class DepthConv1dBlock {
 public:
  DepthConv1dBlock() = default;
  DepthConv1dBlock(const std::string& name, std::size_t channels, std::size_t hidden, std::size_t kernel,
                   std::size_t dilation, Rng& rng)
      : entry_(name + ".entry", channels, hidden, true, rng),
        act1_(name + ".act1"),
        norm1_(name + ".norm1", hidden),
        depthwise_(name + ".depthwise", hidden, kernel, dilation, rng),
        act2_(name + ".act2"),
        norm2_(name + ".norm2", hidden),
        exit_(name + ".exit", hidden, channels, true, rng) {}

  Var<T> operator()(const Var<T>& x) {
    auto h = norm1_(act1_(entry_(x)));
    h = norm2_(act2_(depthwise_(h)));
    return ops::add(x, exit_(h));
  }

  void collect(ParamList<T>& out) {
    entry_.collect(out);
    act1_.collect(out);
    norm1_.collect(out);
    depthwise_.collect(out);
    act2_.collect(out);
    norm2_.collect(out);
    exit_.collect(out);
  }

 private:
  Conv1x1<T> entry_;
  PReLU<T> act1_;
  GlobalLayerNorm<T> norm1_;
  DepthwiseConv<T> depthwise_;
  PReLU<T> act2_;
  GlobalLayerNorm<T> norm2_;
  Conv1x1<T> exit_;
};

}  // namespace gcbase::nn
