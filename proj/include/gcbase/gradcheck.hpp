// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Central finite-difference checks of analytic gradients in double precision.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/extractor.hpp"
#include "gcbase/objectives.hpp"
#include "gcbase/random.hpp"

namespace gcbase::gradcheck {

using P = ad::Parameter<double>;
using V = ad::Var<double>;

struct Report {
  std::string component;
  double max_rel_error = 0;
  std::size_t probes = 0;
  double tolerance = 0;
  bool passed = false;
};

inline nlohmann::json to_json(const Report& r) {
  return {{"component", r.component},
          {"max_rel_error", r.max_rel_error},
          {"probes", r.probes},
          {"tolerance", r.tolerance},
          {"passed", r.passed}};
}

/// Relative error |a - n| / max(|a|, |n|, floor), floor = 1e-6 * max(1, |f|),
/// maximized over probed coordinates. Parameters with at most
/// `probes_per_param` entries are checked exhaustively.
inline Report check(const std::string& name, const nn::ParamList<double>& params, const std::function<V()>& f,
                    double tol, std::uint64_t seed, std::size_t probes_per_param = 8, double h = 1e-6) {
  for (auto* p : params) p->zero_grad();
  const V y = f();
  ad::backward(y);
  const double floor = 1e-6 * std::max(1.0, std::abs(y.item()));
  Report r;
  r.component = name;
  r.tolerance = tol;
  Rng rng(seed);
  ad::NoGradGuard guard;
  for (auto* p : params) {
    const std::size_t n = p->value.size();
    std::vector<std::size_t> idx;
    if (n <= probes_per_param) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (std::size_t k = 0; k < probes_per_param; ++k) idx.push_back(rng.below(n));
    }
    for (auto i : idx) {
      const double orig = p->value[i];
      p->value[i] = orig + h;
      const double fp = f().item();
      p->value[i] = orig - h;
      const double fm = f().item();
      p->value[i] = orig;
      const double num = (fp - fm) / (2.0 * h);
      const double ana = p->grad[i];
      const double err = std::abs(ana - num) / std::max({std::abs(ana), std::abs(num), floor});
      r.max_rel_error = std::max(r.max_rel_error, err);
      ++r.probes;
    }
  }
  r.passed = r.max_rel_error < tol;
  return r;
}

namespace detail {

inline P random_param(const std::string& name, Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  P p(name, Tensor<double>(std::move(shape)));
  for (auto& v : p.value.storage()) v = rng.uniform(lo, hi);
  return p;
}

inline double weighted_total(const V& y, const Tensor<double>& w) {
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * y.value()[i];
  return s;
}

// Scalar probe sum_i w_i y_i, differentiable in y.
inline V project(const V& y, const Tensor<double>& w) {
  Tensor<double> v({1}, weighted_total(y, w));
  return ad::make_op<double>(std::move(v), {y}, [w](ad::Node<double>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[0] * w[i];
  });
}

inline Tensor<double> random_tensor(Shape s, Rng& rng) {
  Tensor<double> t(std::move(s));
  for (auto& v : t.storage()) v = rng.normal();
  return t;
}

}  // namespace detail

inline Report check_discretization_loss(std::uint64_t seed, double tol = 1e-6) {
  Rng rng(seed);
  auto s = detail::random_param("sel", {4, 6}, rng, 0.0, 1.0);
  selection::RegularizerConfig reg;
  return check("discretization_loss", {&s}, [&] { return selection::discretization_loss(ad::bind(s), reg, 6); }, tol,
               seed, 64);
}

inline Report check_cardinality_loss(std::uint64_t seed, double tol = 1e-6) {
  Rng rng(seed);
  auto s = detail::random_param("sel", {4, 6}, rng, 0.0, 1.0);
  selection::RegularizerConfig reg;
  return check("cardinality_loss", {&s}, [&] { return selection::cardinality_loss(ad::bind(s), reg); }, tol, seed,
               64);
}

inline Report check_si_sdr(std::uint64_t seed, double tol = 1e-4) {
  Rng rng(seed);
  const auto ref = detail::random_tensor({1, 256}, rng);
  auto est = detail::random_param("estimate", {1, 256}, rng);
  for (std::size_t i = 0; i < 256; ++i) est.value[i] += 0.8 * ref[i];
  return check("si_sdr", {&est}, [&] { return ops::scale(objectives::si_sdr(ad::bind(est), ref), -1.0); }, tol,
               seed, 64);
}

inline Report check_se_attention(std::uint64_t seed, double tol = 1e-3) {
  Rng rng(seed);
  const std::size_t c = 8, t = 24, nb = 3;
  model::SeAttention<double> se("se", c, 4, rng);
  std::vector<P> br;
  for (std::size_t b = 0; b < nb; ++b) br.push_back(detail::random_param("branch" + std::to_string(b), {c, t}, rng));
  const auto w = detail::random_tensor({nb}, rng);
  nn::ParamList<double> params;
  for (auto& p : br) params.push_back(&p);
  se.collect(params);
  return check("se_attention", params, [&] {
    std::vector<V> in;
    for (auto& p : br) in.push_back(ad::bind(p));
    return detail::project(se(in), w);
  }, tol, seed);
}

inline Report check_wd_block(std::uint64_t seed, double tol = 1e-3) {
  Rng rng(seed);
  const std::size_t c = 8, t = 40;
  model::WdBlock<double> block("wd", c, 16, 3, {1, 2, 4}, 4, rng);
  auto x = detail::random_param("x", {c, t}, rng);
  const auto w = detail::random_tensor({c, t}, rng);
  nn::ParamList<double> params{&x};
  block.collect(params);
  return check("wd_block", params, [&] { return detail::project(block(ad::bind(x)), w); }, tol, seed);
}

/// Tiny extractor with selector, combined loss with all three terms.
inline Report check_full(std::uint64_t seed, double tol = 1e-3) {
  Rng rng(seed);
  const std::size_t n_eeg = 6;
  auto cfg = model::ModelConfig::tiny(n_eeg, 1280.0, 128.0);
  cfg.n_blocks = 2;
  selection::SelectorConfig scfg;
  scfg.channels = 8;
  scfg.hidden = 16;
  scfg.n_blocks = 2;
  Extractor<double> model(cfg, scfg, seed);
  const auto mixture = detail::random_tensor({1, 640}, rng);
  auto target = detail::random_tensor({1, 640}, rng);
  for (std::size_t i = 0; i < 640; ++i) target[i] = 0.5 * target[i] + mixture[i];
  const auto eeg = detail::random_tensor({n_eeg, 64}, rng);
  objectives::LossWeights lw;
  lw.gamma = 0.3;
  selection::RegularizerConfig reg;
  return check("full", model.parameters(), [&] {
    const auto out = model.forward(mixture, eeg);
    return objectives::total_loss(out.estimate, target, out.selection, lw, reg, n_eeg).total;
  }, tol, seed, 3);
}

inline const std::vector<std::string>& components() {
  static const std::vector<std::string> names{"discretization_loss", "cardinality_loss", "si_sdr",
                                              "se_attention",        "wd_block",         "full"};
  return names;
}

inline Report run(const std::string& component, std::uint64_t seed) {
  if (component == "discretization_loss") return check_discretization_loss(seed);
  if (component == "cardinality_loss") return check_cardinality_loss(seed);
  if (component == "si_sdr") return check_si_sdr(seed);
  if (component == "se_attention") return check_se_attention(seed);
  if (component == "wd_block") return check_wd_block(seed);
  if (component == "full") return check_full(seed);
  throw ConfigError("unknown grad-check component '" + component + "'");
}

}  // namespace gcbase::gradcheck
