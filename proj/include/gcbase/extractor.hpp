// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Backbone plus optional ConvRS selector operating on candidate-set EEG.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gcbase/model.hpp"
#include "gcbase/selection.hpp"

namespace gcbase {

/// How EEG rows are gated before the backbone sees them.
enum class GateMode {
  kSelector,  // soft gates from the ConvRS network (identity if there is none)
  kFixed,     // caller-provided gate vector, e.g. a binary finalized subset
};

template <typename T>
class Extractor {
 public:
  struct Output {
    ad::Var<T> estimate;   // [1 x T]
    ad::Var<T> selection;  // [|S|], undefined without a selector
  };

  Extractor() = default;
  Extractor(const model::ModelConfig& cfg, std::optional<selection::SelectorConfig> selector, std::uint64_t seed)
      : backbone_(cfg, seed) {
    if (selector) selector_.emplace(cfg.eeg_in_channels, *selector, Rng(seed).fork(0x5e1ec7).next());
  }

  bool has_selector() const noexcept { return selector_.has_value(); }
  const model::ModelConfig& config() const { return backbone_.config(); }
  model::WdTcn<T>& backbone() { return backbone_; }
  selection::ConvRs<T>& selector() { return *selector_; }

  /// `floor_noise`, if given, is added to the gated EEG (training-time noise
  /// floor that gives the gates an absolute scale).
  Output forward(const Tensor<T>& mixture, const Tensor<T>& eeg, GateMode mode = GateMode::kSelector,
                 const std::vector<double>* gate = nullptr, const Tensor<T>* floor_noise = nullptr) {
    Output out;
    const auto x = ad::Var<T>::leaf(mixture);
    auto e = ad::Var<T>::leaf(eeg);
    if (mode == GateMode::kFixed) {
      if (!gate) throw InvariantError("fixed gating requires a gate vector");
      Tensor<T> g({gate->size()});
      for (std::size_t i = 0; i < gate->size(); ++i) g[i] = static_cast<T>((*gate)[i]);
      e = selection::apply_selection(e, ad::Var<T>::leaf(std::move(g)));
    } else if (selector_) {
      out.selection = (*selector_)(e);
      e = selection::apply_selection(e, out.selection);
    }
    if (floor_noise) e = ops::add(e, ad::Var<T>::leaf(*floor_noise));
    out.estimate = backbone_.forward(x, e);
    return out;
  }

  /// Selection vector for one EEG matrix, without recording a graph.
  std::vector<double> select(const Tensor<T>& eeg) {
    if (!selector_) throw InvariantError("extractor has no selector");
    ad::NoGradGuard guard;
    const auto s = (*selector_)(ad::Var<T>::leaf(eeg));
    return {s.value().storage().begin(), s.value().storage().end()};
  }

  nn::ParamList<T> parameters() {
    auto out = backbone_.parameters();
    if (selector_) {
      auto s = selector_->parameters();
      out.insert(out.end(), s.begin(), s.end());
    }
    return out;
  }

 private:
  model::WdTcn<T> backbone_;
  std::optional<selection::ConvRs<T>> selector_;
};

}  // namespace gcbase
