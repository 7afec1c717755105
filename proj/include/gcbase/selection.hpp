// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Soft channel selection over the candidate set: the ConvRS selector network,
// channel gating, the discretization/cardinality regularizers, and the
// reduction of per-example selection vectors to a deployable subset.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/autograd.hpp"
#include "gcbase/errors.hpp"
#include "gcbase/geometry.hpp"
#include "gcbase/nn.hpp"
#include "gcbase/ops.hpp"

namespace gcbase::selection {

template <typename T>
using Var = ad::Var<T>;

struct RegularizerConfig {
  double k1 = 100.0;
  double k2 = 0.25;
  double b = 0.25;

  void validate() const {
    if (!(k1 > 0.0) || !(k2 > 0.0)) throw ConfigError("regularizer: k1 and k2 must be positive");
    if (!std::isfinite(b)) throw ConfigError("regularizer: b must be finite");
  }
};

inline void to_json(nlohmann::json& j, const RegularizerConfig& r) { j = {{"k1", r.k1}, {"k2", r.k2}, {"b", r.b}}; }
inline void from_json(const nlohmann::json& j, RegularizerConfig& r) {
  RegularizerConfig d;
  r.k1 = j.value("k1", d.k1);
  r.k2 = j.value("k2", d.k2);
  r.b = j.value("b", d.b);
  r.validate();
}

struct SelectorConfig {
  std::size_t channels = 32;
  std::size_t hidden = 64;
  std::size_t n_blocks = 3;
  std::size_t kernel = 3;

  void validate() const {
    if (channels == 0 || hidden == 0 || kernel == 0) throw ConfigError("selector: sizes must be positive");
  }
};

inline void to_json(nlohmann::json& j, const SelectorConfig& c) {
  j = {{"channels", c.channels}, {"hidden", c.hidden}, {"n_blocks", c.n_blocks}, {"kernel", c.kernel}};
}
inline void from_json(const nlohmann::json& j, SelectorConfig& c) {
  SelectorConfig d;
  c.channels = j.value("channels", d.channels);
  c.hidden = j.value("hidden", d.hidden);
  c.n_blocks = j.value("n_blocks", d.n_blocks);
  c.kernel = j.value("kernel", d.kernel);
  c.validate();
}

/// ConvRS: 1x1 input projection, a stack of DepthConv1D blocks, global
/// average pooling over time, a linear layer and a sigmoid.
template <typename T>
class ConvRs {
 public:
  ConvRs() = default;
  ConvRs(std::size_t n_inputs, const SelectorConfig& cfg, std::uint64_t seed) : n_inputs_(n_inputs), cfg_(cfg) {
    cfg.validate();
    if (n_inputs == 0) throw ConfigError("selector: empty candidate set");
    Rng rng(seed);
    in_proj_ = nn::Conv1x1<T>("selector.in_proj", n_inputs, cfg.channels, true, rng);
    for (std::size_t b = 0; b < cfg.n_blocks; ++b)
      blocks_.emplace_back("selector.block" + std::to_string(b), cfg.channels, cfg.hidden, cfg.kernel,
                           std::size_t{1} << b, rng);
    head_ = nn::Linear<T>("selector.head", cfg.channels, n_inputs, rng);
    // Zero head: every gate starts at exactly 0.5, where L_d has no gradient.
    head_.weight().value.fill(T(0));
    head_.bias().value.fill(T(0));
  }

  std::size_t inputs() const noexcept { return n_inputs_; }
  const SelectorConfig& config() const noexcept { return cfg_; }

  /// EEG [|S| x T_e] -> selection vector [|S|] with entries in [0, 1].
  Var<T> operator()(const Var<T>& eeg) {
    if (eeg.value().rank() != 2 || eeg.value().dim(0) != n_inputs_)
      throw ShapeError("selector expects " + std::to_string(n_inputs_) + " EEG rows, got " + shape_str(eeg.shape()));
    Var<T> h = in_proj_(eeg);
    for (auto& b : blocks_) h = b(h);
    return ops::sigmoid(head_(ops::time_mean(h)));
  }

  nn::ParamList<T> parameters() {
    nn::ParamList<T> out;
    in_proj_.collect(out);
    for (auto& b : blocks_) b.collect(out);
    head_.collect(out);
    return out;
  }

 private:
  std::size_t n_inputs_ = 0;
  SelectorConfig cfg_;
  nn::Conv1x1<T> in_proj_;
  std::vector<nn::DepthConv1dBlock<T>> blocks_;
  nn::Linear<T> head_;
};

/// Scales EEG row c by sel[c].
template <typename T>
Var<T> apply_selection(const Var<T>& eeg, const Var<T>& sel) {
  return ops::scale_rows(eeg, sel);
}

namespace detail {

inline std::size_t batch_rows(const Shape& s) {
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("selection batch must be a vector or a [B x |S|] matrix, got " + shape_str(s));
}

}  // namespace detail

/// L_d = k1 * (-(sum d^2) / (n * B) + b), d = s - 0.5. Accepts one selection
/// vector (B = 1) or a [B x |S|] batch.
template <typename T>
Var<T> discretization_loss(const Var<T>& sel, const RegularizerConfig& reg, std::size_t normalizer_n) {
  const std::size_t rows = detail::batch_rows(sel.shape());
  if (rows == 0 || normalizer_n == 0) throw ShapeError("discretization_loss: empty batch");
  const double denom = static_cast<double>(normalizer_n) * static_cast<double>(rows);
  double acc = 0.0;
  for (T v : sel.value().storage()) {
    const double d = static_cast<double>(v) - 0.5;
    acc += d * d;
  }
  Tensor<T> y({1}, static_cast<T>(reg.k1 * (-acc / denom + reg.b)));
  const double k1 = reg.k1;
  return ad::make_op<T>(std::move(y), {sel}, [k1, denom](ad::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    const double c = -2.0 * k1 / denom * static_cast<double>(self.grad[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(c * (static_cast<double>(p.value[i]) - 0.5));
  });
}

/// L_reg = k2 * mean over the batch of ||s||^2.
template <typename T>
Var<T> cardinality_loss(const Var<T>& sel, const RegularizerConfig& reg) {
  const std::size_t rows = detail::batch_rows(sel.shape());
  if (rows == 0) throw ShapeError("cardinality_loss: empty batch");
  double acc = 0.0;
  for (T v : sel.value().storage()) acc += static_cast<double>(v) * static_cast<double>(v);
  Tensor<T> y({1}, static_cast<T>(reg.k2 * acc / static_cast<double>(rows)));
  const double scale = reg.k2 / static_cast<double>(rows);
  return ad::make_op<T>(std::move(y), {sel}, [scale](ad::Node<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    auto& g = p.ensure_grad();
    const double c = 2.0 * scale * static_cast<double>(self.grad[0]);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += static_cast<T>(c * static_cast<double>(p.value[i]));
  });
}

inline double discretization_loss(const Tensor<double>& sel, const RegularizerConfig& reg, std::size_t n) {
  ad::NoGradGuard guard;
  return discretization_loss(Var<double>::leaf(sel), reg, n).item();
}

inline double cardinality_loss(const Tensor<double>& sel, const RegularizerConfig& reg) {
  ad::NoGradGuard guard;
  return cardinality_loss(Var<double>::leaf(sel), reg).item();
}

// ------------------------------------------------------------- finalization

struct SelectedSubset {
  std::vector<std::size_t> indices;    // layout indices, subset of the candidate set
  std::vector<std::size_t> positions;  // rows within the candidate set
  std::vector<double> mean_selection;  // one value per candidate
  double threshold = 0.5;
  bool fallback = false;
  std::string warning;
};

/// Averages per-example selection vectors and keeps the candidates whose mean
/// is at least `threshold`. If none qualifies, the single highest-mean
/// candidate is returned and a warning is recorded.
inline SelectedSubset finalize_subset(const std::vector<std::vector<double>>& selections, double threshold,
                                      const geometry::CandidateSet& candidates) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("selection threshold must lie in (0, 1)");
  if (selections.empty()) throw DataError("finalize_subset: no validation segments");
  const std::size_t n = candidates.size();
  SelectedSubset out;
  out.threshold = threshold;
  out.mean_selection.assign(n, 0.0);
  for (const auto& s : selections) {
    if (s.size() != n)
      throw ShapeError("selection vector of length " + std::to_string(s.size()) + " for " + std::to_string(n) +
                       " candidates");
    for (std::size_t c = 0; c < n; ++c) out.mean_selection[c] += s[c];
  }
  for (auto& v : out.mean_selection) v /= static_cast<double>(selections.size());
  for (std::size_t c = 0; c < n; ++c)
    if (out.mean_selection[c] >= threshold) out.positions.push_back(c);
  if (out.positions.empty()) {
    const auto best = std::max_element(out.mean_selection.begin(), out.mean_selection.end());
    out.positions.push_back(static_cast<std::size_t>(best - out.mean_selection.begin()));
    out.fallback = true;
    out.warning = "no candidate reached threshold " + std::to_string(threshold) +
                  "; keeping the single highest-scoring channel";
  }
  for (auto p : out.positions) out.indices.push_back(candidates.indices()[p]);
  for (auto i : out.indices)
    if (!candidates.contains(i)) throw InvariantError("selected channel outside the candidate set");
  return out;
}

/// Runs `selector` on every validation EEG matrix and finalizes the subset.
inline SelectedSubset finalize_subset(const std::function<std::vector<double>(const Tensor<double>&)>& selector,
                                      const std::vector<Tensor<double>>& validation_eeg, double threshold,
                                      const geometry::CandidateSet& candidates) {
  std::vector<std::vector<double>> sel;
  sel.reserve(validation_eeg.size());
  for (const auto& e : validation_eeg) sel.push_back(selector(e));
  return finalize_subset(sel, threshold, candidates);
}

/// Binary gate over the candidate rows: 1 on the subset, 0 elsewhere.
inline std::vector<double> subset_gate(const SelectedSubset& s, std::size_t n_candidates) {
  std::vector<double> g(n_candidates, 0.0);
  for (auto p : s.positions) g.at(p) = 1.0;
  return g;
}

inline nlohmann::json subset_report(const SelectedSubset& s, const geometry::CandidateSet& candidates,
                                    const geometry::ElectrodeLayout& layout, double gamma) {
  nlohmann::json cand = nlohmann::json::array();
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto idx = candidates.indices()[c];
    cand.push_back({{"index", idx}, {"label", layout.names().at(idx)}, {"mean_selection", s.mean_selection.at(c)}});
  }
  nlohmann::json labels = nlohmann::json::array();
  for (auto i : s.indices) labels.push_back(layout.names().at(i));
  nlohmann::json j = {{"layout_id", layout.id()},
                      {"gamma", gamma},
                      {"threshold", s.threshold},
                      {"candidates", cand},
                      {"subset_indices", s.indices},
                      {"subset_labels", labels},
                      {"subset_size", s.indices.size()},
                      {"fallback", s.fallback}};
  if (!s.warning.empty()) j["warning"] = s.warning;
  return j;
}

}  // namespace gcbase::selection
