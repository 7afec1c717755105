// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// SI-SDR, the combined training loss, and pluggable evaluation metrics.

#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/autograd.hpp"
#include "gcbase/dataio.hpp"
#include "gcbase/errors.hpp"
#include "gcbase/io.hpp"
#include "gcbase/selection.hpp"

namespace gcbase::objectives {

template <typename T>
using Var = ad::Var<T>;

/// Guard added to both energies so that degenerate estimates stay finite.
inline constexpr double kSiSdrEps = 1e-12;

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.5;
  double gamma = 0.0;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }
};

inline void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}};
}
inline void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.alpha = j.value("alpha", d.alpha);
  w.beta = j.value("beta", d.beta);
  w.gamma = j.value("gamma", d.gamma);
  w.validate();
}

namespace detail {

struct Projection {
  double dot = 0, ref_energy = 0, target_energy = 0, residual_energy = 0, scale = 0;
};

// x_target = (<est, ref> / ||ref||^2) ref, x_res = x_target - est.
template <typename A, typename B>
Projection project(std::span<const A> est, std::span<const B> ref) {
  if (est.size() != ref.size())
    throw ShapeError("si_sdr: estimate has " + std::to_string(est.size()) + " samples, reference " +
                     std::to_string(ref.size()));
  Projection p;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    p.dot += static_cast<double>(est[i]) * static_cast<double>(ref[i]);
    p.ref_energy += static_cast<double>(ref[i]) * static_cast<double>(ref[i]);
  }
  if (!(p.ref_energy > 0.0)) throw DataError("si_sdr: reference is identically zero");
  p.scale = p.dot / p.ref_energy;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double t = p.scale * static_cast<double>(ref[i]);
    const double r = t - static_cast<double>(est[i]);
    p.target_energy += t * t;
    p.residual_energy += r * r;
  }
  return p;
}

inline std::vector<double> centered(std::span<const double> x) {
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  std::vector<double> out(x.begin(), x.end());
  for (double& v : out) v -= m;
  return out;
}

}  // namespace detail

/// 10 log10((||x_target||^2 + eps) / (||x_res||^2 + eps)). No mean removal
/// unless `center` is set.
inline double si_sdr(std::span<const double> estimate, std::span<const double> reference, bool center = false) {
  if (center) {
    const auto e = detail::centered(estimate), r = detail::centered(reference);
    return si_sdr(e, r, false);
  }
  const auto p = detail::project(estimate, reference);
  return 10.0 * std::log10((p.target_energy + kSiSdrEps) / (p.residual_energy + kSiSdrEps));
}

inline double si_sdr(const dataio::Waveform& estimate, const dataio::Waveform& reference, bool center = false) {
  return si_sdr(std::span<const double>(estimate.samples), std::span<const double>(reference.samples), center);
}

/// Differentiable SI-SDR of an estimate (any shape, flattened) against a
/// constant reference. Energies are accumulated in double precision.
template <typename T>
Var<T> si_sdr(const Var<T>& estimate, const Tensor<T>& reference) {
  const auto p = detail::project(std::span<const T>(estimate.value().storage()), std::span<const T>(reference.storage()));
  const double a = p.target_energy + kSiSdrEps, r = p.residual_energy + kSiSdrEps;
  Tensor<T> y({1}, static_cast<T>(10.0 * std::log10(a / r)));
  return ad::make_op<T>(std::move(y), {estimate}, [ref = reference, p, a, r](ad::Node<T>& self) {
    auto& pe = *self.parents[0];
    if (!pe.requires_grad) return;
    auto& g = pe.ensure_grad();
    // dA/dest = 2 x_target, dR/dest = -2 x_res.
    const double c = 10.0 / std::numbers::ln10 * static_cast<double>(self.grad[0]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double t = p.scale * static_cast<double>(ref[i]);
      const double res = t - static_cast<double>(pe.value[i]);
      g[i] += static_cast<T>(c * (2.0 * t / a + 2.0 * res / r));
    }
  });
}

/// Value reached by a perfect estimate of `reference`.
inline double si_sdr_ceiling(std::span<const double> reference) {
  double e = 0;
  for (double v : reference) e += v * v;
  return 10.0 * std::log10((e + kSiSdrEps) / kSiSdrEps);
}

template <typename T>
struct LossTerms {
  Var<T> total;
  double si_sdr = 0.0;
  double discretization = 0.0;
  double cardinality = 0.0;
};

/// One example's share of L = -alpha * SI-SDR + beta * L_d + gamma * L_reg
/// for a batch of `batch_size` examples. Summing the shares over the batch
/// gives the batch loss. `sel` may be undefined when no selector is used.
template <typename T>
LossTerms<T> total_loss(const Var<T>& estimate, const Tensor<T>& reference, const Var<T>& sel, const LossWeights& w,
                        const selection::RegularizerConfig& reg, std::size_t normalizer_n, std::size_t batch_size = 1) {
  if (batch_size == 0) throw ShapeError("total_loss: batch size must be positive");
  const T inv_b = T(1) / static_cast<T>(batch_size);
  LossTerms<T> out;
  const Var<T> sdr = si_sdr(estimate, reference);
  out.si_sdr = sdr.item();
  Var<T> total = ops::scale(sdr, static_cast<T>(-w.alpha) * inv_b);
  if (sel.defined()) {
    const Var<T> ld = selection::discretization_loss(sel, reg, normalizer_n);
    const Var<T> lr = selection::cardinality_loss(sel, reg);
    out.discretization = ld.item();
    out.cardinality = lr.item();
    total = ops::add(total, ops::scale(ld, static_cast<T>(w.beta) * inv_b));
    total = ops::add(total, ops::scale(lr, static_cast<T>(w.gamma) * inv_b));
  }
  out.total = total;
  return out;
}

/// Batch-level loss in double precision: mean over examples of
/// -alpha * SI-SDR, plus beta * L_d and gamma * L_reg of the selection batch.
inline double total_loss(const std::vector<std::vector<double>>& estimates,
                         const std::vector<std::vector<double>>& references, const Tensor<double>& sel_batch,
                         const LossWeights& w, const selection::RegularizerConfig& reg, std::size_t normalizer_n) {
  if (estimates.size() != references.size() || estimates.empty()) throw ShapeError("total_loss: batch mismatch");
  double sdr = 0;
  for (std::size_t b = 0; b < estimates.size(); ++b) sdr += si_sdr(estimates[b], references[b]);
  sdr /= static_cast<double>(estimates.size());
  double l = -w.alpha * sdr;
  if (!sel_batch.empty())
    l += w.beta * selection::discretization_loss(sel_batch, reg, normalizer_n) +
         w.gamma * selection::cardinality_loss(sel_batch, reg);
  return l;
}

// ------------------------------------------------------------------ metrics

struct MetricResult {
  std::optional<double> value;
  std::string error;
  bool ok() const { return value.has_value(); }
};

using MetricFn = std::function<double(const dataio::Waveform& estimate, const dataio::Waveform& reference)>;

class MetricRegistry {
 public:
  /// Registry holding only SI-SDR.
  MetricRegistry() {
    add("SI-SDR", [](const dataio::Waveform& e, const dataio::Waveform& r) { return si_sdr(e, r); });
  }

  void add(const std::string& name, MetricFn fn) { metrics_[name] = std::move(fn); }
  bool has(const std::string& name) const { return metrics_.count(name) > 0; }
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : metrics_) out.push_back(k);
    return out;
  }
  const std::map<std::string, MetricFn>& entries() const { return metrics_; }

  /// Registers an external evaluator. `command` may contain `{estimate}`,
  /// `{reference}` and `{rate}`; the last number printed on stdout is the
  /// score. Temporary WAV files are written under `scratch_dir`.
  void add_external(const std::string& name, const std::string& command, const std::filesystem::path& scratch_dir) {
    add(name, [name, command, scratch_dir](const dataio::Waveform& e, const dataio::Waveform& r) {
      std::filesystem::create_directories(scratch_dir);
      const auto est_path = scratch_dir / (name + ".estimate.wav");
      const auto ref_path = scratch_dir / (name + ".reference.wav");
      io::write_wav(est_path, e);
      io::write_wav(ref_path, r);
      std::string cmd = command;
      auto sub = [&cmd](const std::string& key, const std::string& val) {
        for (auto pos = cmd.find(key); pos != std::string::npos; pos = cmd.find(key, pos + val.size()))
          cmd.replace(pos, key.size(), val);
      };
      sub("{estimate}", est_path.string());
      sub("{reference}", ref_path.string());
      sub("{rate}", std::to_string(static_cast<long>(std::lround(e.rate_hz))));
      std::string output;
      FILE* pipe = popen(cmd.c_str(), "r");
      if (!pipe) throw Error("cannot run evaluator '" + name + "'");
      char buf[256];
      while (std::fgets(buf, sizeof buf, pipe)) output += buf;
      const int status = pclose(pipe);
      std::filesystem::remove(est_path);
      std::filesystem::remove(ref_path);
      if (status != 0) throw Error("evaluator '" + name + "' exited with status " + std::to_string(status));
      std::istringstream is(output);
      std::string tok;
      std::optional<double> last;
      while (is >> tok) {
        try {
          std::size_t used = 0;
          const double v = std::stod(tok, &used);
          if (used == tok.size()) last = v;
        } catch (const std::exception&) {
        }
      }
      if (!last) throw Error("evaluator '" + name + "' printed no score");
      return *last;
    });
  }

 private:
  std::map<std::string, MetricFn> metrics_;
};

/// Scores `estimate` with every registered metric. A failing evaluator yields
/// an error entry for that metric only; unregistered metrics are absent.
inline std::map<std::string, MetricResult> evaluate_metrics(const dataio::Waveform& estimate,
                                                            const dataio::Waveform& reference,
                                                            const MetricRegistry& registry) {
  std::map<std::string, MetricResult> out;
  for (const auto& [name, fn] : registry.entries()) {
    MetricResult r;
    try {
      const double v = fn(estimate, reference);
      if (std::isfinite(v))
        r.value = v;
      else
        r.error = "non-finite score";
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    out.emplace(name, std::move(r));
  }
  return out;
}

}  // namespace gcbase::objectives
