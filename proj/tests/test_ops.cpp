// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "gcbase/gradcheck.hpp"
#include "gcbase/ops.hpp"

using namespace gcbase;
using gradcheck::P;
using gradcheck::V;
namespace gd = gcbase::gradcheck::detail;

namespace {

V constant(const Tensor<double>& t) { return V::leaf(t, false); }

// Each op is checked by projecting its output on a random direction.
void expect_grad(const std::string& name, const nn::ParamList<double>& params, const std::function<V()>& out,
                 std::uint64_t seed = 3) {
  Rng rng(seed + 100);
  const auto w = gd::random_tensor(out().shape(), rng);
  const auto r = gradcheck::check(name, params, [&] { return gd::project(out(), w); }, 1e-5, seed, 16);
  EXPECT_TRUE(r.passed) << name << " max rel error " << r.max_rel_error;
}

// Direct loops, no im2col.
Tensor<double> conv_reference(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b,
                              ops::ConvGeometry g) {
  const std::size_t ci = x.dim(0), t = x.dim(1), co = w.dim(0), k = w.dim(2);
  const std::size_t to = g.out_length(t, k);
  Tensor<double> y({co, to});
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t i = 0; i < to; ++i) {
      double s = b[o];
      for (std::size_t c = 0; c < ci; ++c)
        for (std::size_t j = 0; j < k; ++j) {
          const long pos = static_cast<long>(i * g.stride + j * g.dilation) - static_cast<long>(g.pad_left);
          if (pos >= 0 && pos < static_cast<long>(t)) s += w[(o * ci + c) * k + j] * x(c, static_cast<std::size_t>(pos));
        }
      y(o, i) = s;
    }
  return y;
}

}  // namespace

TEST(Conv1d, MatchesDirectLoops) {
  Rng rng(1);
  for (ops::ConvGeometry g : {ops::ConvGeometry{1, 1, 0, 0}, ops::ConvGeometry{2, 1, 1, 1}, ops::ConvGeometry{3, 2, 2, 0},
                              ops::ConvGeometry{8, 1, 0, 0}}) {
    const auto x = gd::random_tensor({3, 29}, rng);
    const auto w = gd::random_tensor({4, 3, 5}, rng);
    const auto b = gd::random_tensor({4}, rng);
    const auto y = ops::conv1d(constant(x), constant(w), constant(b), g).value();
    const auto ref = conv_reference(x, w, b, g);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Conv1d, Gradient) {
  Rng rng(2);
  auto x = gd::random_param("x", {3, 20}, rng);
  auto w = gd::random_param("w", {2, 3, 4}, rng);
  auto b = gd::random_param("b", {2}, rng);
  expect_grad("conv1d", {&x, &w, &b}, [&] {
    return ops::conv1d(ad::bind(x), ad::bind(w), ad::bind(b), ops::ConvGeometry{2, 1, 1, 2});
  });
}

TEST(DepthwiseConv, MatchesDirectLoops) {
  Rng rng(3);
  const std::size_t c = 3, t = 17, k = 3, d = 4;
  const auto x = gd::random_tensor({c, t}, rng);
  const auto w = gd::random_tensor({c, k}, rng);
  const auto b = gd::random_tensor({c}, rng);
  const std::size_t pad = d * (k - 1) / 2;
  const auto y = ops::depthwise_conv1d(constant(x), constant(w), constant(b), d, pad, pad).value();
  ASSERT_EQ(y.shape(), (Shape{c, t}));
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < t; ++i) {
      double s = b[ch];
      for (std::size_t j = 0; j < k; ++j) {
        const long pos = static_cast<long>(i + j * d) - static_cast<long>(pad);
        if (pos >= 0 && pos < static_cast<long>(t)) s += w[ch * k + j] * x(ch, static_cast<std::size_t>(pos));
      }
      EXPECT_NEAR(y(ch, i), s, 1e-12);
    }
}

TEST(DepthwiseConv, Gradient) {
  Rng rng(4);
  auto x = gd::random_param("x", {3, 15}, rng);
  auto w = gd::random_param("w", {3, 3}, rng);
  auto b = gd::random_param("b", {3}, rng);
  expect_grad("depthwise", {&x, &w, &b}, [&] { return ops::depthwise_conv1d(ad::bind(x), ad::bind(w), ad::bind(b), 2, 2, 2); });
}

TEST(ConvTranspose, OverlapAdd) {
  Rng rng(5);
  const std::size_t c = 3, f = 6, k = 4, s = 2;
  const auto x = gd::random_tensor({c, f}, rng);
  const auto w = gd::random_tensor({c, 1, k}, rng);
  const auto y = ops::conv_transpose1d(constant(x), constant(w), V{}, s).value();
  ASSERT_EQ(y.shape(), (Shape{1, (f - 1) * s + k}));
  std::vector<double> ref((f - 1) * s + k, 0.0);
  for (std::size_t i = 0; i < f; ++i)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t j = 0; j < k; ++j) ref[i * s + j] += x(ch, i) * w[ch * k + j];
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
}

TEST(ConvTranspose, Gradient) {
  Rng rng(6);
  auto x = gd::random_param("x", {4, 7}, rng);
  auto w = gd::random_param("w", {4, 1, 6}, rng);
  auto b = gd::random_param("b", {1}, rng);
  expect_grad("conv_transpose", {&x, &w, &b}, [&] { return ops::conv_transpose1d(ad::bind(x), ad::bind(w), ad::bind(b), 3); });
}

TEST(PointwiseConv, Gradient) {
  Rng rng(7);
  auto x = gd::random_param("x", {5, 9}, rng);
  auto w = gd::random_param("w", {3, 5}, rng);
  auto b = gd::random_param("b", {3}, rng);
  expect_grad("pointwise", {&x, &w, &b}, [&] { return ops::pointwise_conv(ad::bind(x), ad::bind(w), ad::bind(b)); });
}

TEST(GlobalLayerNorm, NormalizesOverChannelsAndTime) {
  Rng rng(8);
  auto x = gd::random_tensor({4, 30}, rng);
  for (auto& v : x.storage()) v = 3.0 * v + 5.0;
  const auto y = ops::global_layer_norm(constant(x), constant(Tensor<double>({4}, 1.0)), constant(Tensor<double>({4})))
                     .value();
  double mean = 0, sq = 0;
  for (double v : y.storage()) mean += v;
  mean /= static_cast<double>(y.size());
  for (double v : y.storage()) sq += (v - mean) * (v - mean);
  EXPECT_NEAR(mean, 0.0, 1e-12);
  EXPECT_NEAR(sq / static_cast<double>(y.size()), 1.0, 1e-6);
}

TEST(GlobalLayerNorm, Gradient) {
  Rng rng(9);
  auto x = gd::random_param("x", {3, 11}, rng);
  auto g = gd::random_param("g", {3}, rng);
  auto b = gd::random_param("b", {3}, rng);
  expect_grad("gln", {&x, &g, &b}, [&] { return ops::global_layer_norm(ad::bind(x), ad::bind(g), ad::bind(b)); });
}

TEST(Elementwise, Gradients) {
  Rng rng(10);
  auto a = gd::random_param("a", {2, 7}, rng);
  auto b = gd::random_param("b", {2, 7}, rng);
  auto slope = gd::random_param("slope", {1}, rng);
  // Keep inputs away from the relu kink.
  for (auto& v : a.value.storage())
    if (std::abs(v) < 0.05) v = 0.3;
  expect_grad("add", {&a, &b}, [&] { return ops::add(ad::bind(a), ad::bind(b)); });
  expect_grad("sub", {&a, &b}, [&] { return ops::sub(ad::bind(a), ad::bind(b)); });
  expect_grad("mul", {&a, &b}, [&] { return ops::mul(ad::bind(a), ad::bind(b)); });
  expect_grad("scale", {&a}, [&] { return ops::scale(ad::bind(a), -2.5); });
  expect_grad("add_scalar", {&a}, [&] { return ops::add_scalar(ad::bind(a), 4.0); });
  expect_grad("mean_n", {&a, &b}, [&] { return ops::mean_n<double>({ad::bind(a), ad::bind(b), ad::bind(a)}); });
  expect_grad("relu", {&a}, [&] { return ops::relu(ad::bind(a)); });
  expect_grad("prelu", {&a, &slope}, [&] { return ops::prelu(ad::bind(a), ad::bind(slope)); });
  expect_grad("sigmoid", {&a}, [&] { return ops::sigmoid(ad::bind(a)); });
}

TEST(Softmax, SumsToOneAndIsShiftInvariant) {
  const auto x = Tensor<double>::vector({1000.0, 1001.0, 999.0});
  const auto y = ops::softmax(constant(x)).value();
  double s = 0;
  for (double v : y.storage()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  const auto z = ops::softmax(constant(Tensor<double>::vector({0.0, 1.0, -1.0}))).value();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(y[i], z[i], 1e-12);
  EXPECT_NEAR(z[1] / z[0], std::exp(1.0), 1e-12);
}

TEST(Softmax, Gradient) {
  Rng rng(11);
  auto a = gd::random_param("a", {5}, rng);
  expect_grad("softmax", {&a}, [&] { return ops::softmax(ad::bind(a)); });
}

TEST(Reductions, Gradients) {
  Rng rng(12);
  auto x = gd::random_param("x", {3, 8}, rng);
  auto w = gd::random_param("w", {4, 3}, rng);
  auto b = gd::random_param("b", {4}, rng);
  auto s = gd::random_param("s", {3}, rng);
  auto bw = gd::random_param("bw", {2}, rng);
  auto y = gd::random_param("y", {3, 8}, rng);
  expect_grad("time_mean", {&x}, [&] { return ops::time_mean(ad::bind(x)); });
  expect_grad("linear", {&s, &w, &b}, [&] { return ops::linear(ad::bind(s), ad::bind(w), ad::bind(b)); });
  expect_grad("scale_rows", {&x, &s}, [&] { return ops::scale_rows(ad::bind(x), ad::bind(s)); });
  expect_grad("weighted_sum", {&bw, &x, &y}, [&] { return ops::weighted_sum(ad::bind(bw), {ad::bind(x), ad::bind(y)}); });
  expect_grad("concat", {&s, &b}, [&] { return ops::concat<double>({ad::bind(s), ad::bind(b)}); });
}

TEST(TimeMean, Values) {
  const auto x = Tensor<double>({2, 3}, {1, 2, 3, -1, 0, 4});
  const auto y = ops::time_mean(constant(x)).value();
  EXPECT_DOUBLE_EQ(y[0], 2.0);
  EXPECT_DOUBLE_EQ(y[1], 1.0);
}

TEST(Interpolation, LinearBetweenSamples) {
  const auto x = Tensor<double>({1, 3}, {0.0, 10.0, 20.0});
  const auto map = ops::InterpolationMap::from_positions(3, {0.0, 0.25, 1.5, 2.0, 7.0, -1.0});
  const auto y = ops::interpolate_time(constant(x), map).value();
  const std::vector<double> want{0.0, 2.5, 15.0, 20.0, 20.0, 0.0};
  ASSERT_EQ(y.size(), want.size());
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
  EXPECT_THROW(ops::interpolate_time(constant(Tensor<double>({1, 4})), map), ShapeError);
}

TEST(Interpolation, Gradient) {
  Rng rng(13);
  auto x = gd::random_param("x", {2, 6}, rng);
  const auto map = ops::InterpolationMap::from_positions(6, {0.0, 0.7, 1.4, 2.1, 2.8, 3.5, 4.2, 4.9, 5.0});
  expect_grad("interpolate", {&x}, [&] { return ops::interpolate_time(ad::bind(x), map); });
}

TEST(FitLength, TruncatesAndPads) {
  const auto x = Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6});
  const auto shorter = ops::fit_length(constant(x), 2).value();
  EXPECT_EQ(shorter.storage(), (std::vector<double>{1, 2, 4, 5}));
  const auto longer = ops::fit_length(constant(x), 4).value();
  EXPECT_EQ(longer.storage(), (std::vector<double>{1, 2, 3, 0, 4, 5, 6, 0}));
  Rng rng(14);
  auto p = gd::random_param("x", {2, 5}, rng);
  expect_grad("fit_short", {&p}, [&] { return ops::fit_length(ad::bind(p), 3); });
  expect_grad("fit_long", {&p}, [&] { return ops::fit_length(ad::bind(p), 8); });
}

TEST(Attention, RowsAreDistributions) {
  Rng rng(15);
  const auto q = gd::random_tensor({4, 12}, rng);
  const auto k = gd::random_tensor({4, 9}, rng);
  const auto v = gd::random_tensor({3, 9}, rng);
  for (int window : {-1, 0, 2, 5}) {
    std::vector<ops::AttentionRow<double>> rows;
    const auto y = ops::attention(constant(q), constant(k), constant(v), window, &rows).value();
    ASSERT_EQ(y.shape(), (Shape{3, 12}));
    ASSERT_EQ(rows.size(), 12u);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double s = 0;
      for (double w : rows[i].weights) {
        EXPECT_GE(w, 0.0);
        s += w;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
      if (window >= 0)
        for (std::size_t j = 0; j < rows[i].weights.size(); ++j) {
          const auto kj = static_cast<long>(rows[i].first + j);
          EXPECT_TRUE(std::abs(kj - static_cast<long>(i)) <= window || i >= 9) << "query " << i << " key " << kj;
        }
    }
  }
}

TEST(Attention, SingleKeyCopiesValue) {
  Rng rng(16);
  const auto q = gd::random_tensor({4, 5}, rng);
  const auto k = gd::random_tensor({4, 1}, rng);
  const auto v = gd::random_tensor({2, 1}, rng);
  const auto y = ops::attention(constant(q), constant(k), constant(v), -1).value();
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(y(c, i), v(c, 0), 1e-12);
}

TEST(Attention, MatchesDenseSoftmax) {
  Rng rng(17);
  const std::size_t d = 3, f = 4;
  const auto q = gd::random_tensor({d, f}, rng);
  const auto k = gd::random_tensor({d, f}, rng);
  const auto v = gd::random_tensor({2, f}, rng);
  const auto y = ops::attention(constant(q), constant(k), constant(v), -1).value();
  for (std::size_t i = 0; i < f; ++i) {
    std::vector<double> s(f);
    double z = 0;
    for (std::size_t j = 0; j < f; ++j) {
      double dot = 0;
      for (std::size_t c = 0; c < d; ++c) dot += q(c, i) * k(c, j);
      z += s[j] = std::exp(dot / std::sqrt(3.0));
    }
    for (std::size_t c = 0; c < 2; ++c) {
      double out = 0;
      for (std::size_t j = 0; j < f; ++j) out += s[j] / z * v(c, j);
      EXPECT_NEAR(y(c, i), out, 1e-12);
    }
  }
}

TEST(Attention, Gradient) {
  Rng rng(18);
  auto q = gd::random_param("q", {3, 7}, rng);
  auto k = gd::random_param("k", {3, 5}, rng);
  auto v = gd::random_param("v", {2, 5}, rng);
  expect_grad("attention_full", {&q, &k, &v}, [&] { return ops::attention(ad::bind(q), ad::bind(k), ad::bind(v), -1); });
  expect_grad("attention_local", {&q, &k, &v}, [&] { return ops::attention(ad::bind(q), ad::bind(k), ad::bind(v), 1); });
}

TEST(Autograd, GradientsAccumulateAcrossUses) {
  P a("a", Tensor<double>::vector({2.0, -3.0}));
  a.zero_grad();
  const auto x = ad::bind(a);
  const auto y = ops::add(ops::mul(x, x), x);
  ad::backward(gd::project(y, Tensor<double>::vector({1.0, 1.0})));
  EXPECT_DOUBLE_EQ(a.grad[0], 5.0);
  EXPECT_DOUBLE_EQ(a.grad[1], -5.0);
}

TEST(Autograd, NoGradGuardSkipsGraph) {
  P a("a", Tensor<double>::vector({1.0}));
  ad::NoGradGuard guard;
  const auto y = ops::scale(ad::bind(a), 2.0);
  EXPECT_FALSE(y.requires_grad());
}

TEST(Shapes, MismatchIsShapeError) {
  const auto a = constant(Tensor<double>({2, 3}));
  const auto b = constant(Tensor<double>({3, 2}));
  EXPECT_THROW(ops::add(a, b), ShapeError);
  EXPECT_THROW(ops::pointwise_conv(a, constant(Tensor<double>({2, 4}))), ShapeError);
  EXPECT_THROW(ops::softmax(a), ShapeError);
}
