// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Dataset splits, learning-rate schedule, Adam, the training loop, evaluation
// and the sparsity sweep.

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/checkpoint.hpp"
#include "gcbase/dataio.hpp"
#include "gcbase/errors.hpp"
#include "gcbase/extractor.hpp"
#include "gcbase/io.hpp"
#include "gcbase/objectives.hpp"
#include "gcbase/random.hpp"
#include "gcbase/selection.hpp"

namespace gcbase::training {

namespace fs = std::filesystem;

struct TrainConfig {
  double max_lr = 1e-4;
  double warmup_ratio = 0.05;
  std::size_t epochs = 200;
  std::size_t batch_size = 8;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  objectives::LossWeights weights;
  selection::RegularizerConfig reg;
  std::size_t max_steps = 0;   // when non-zero, overrides epochs * steps_per_epoch
  std::size_t eval_every = 0;  // validation period in steps; 0 = once per epoch
  double grad_clip = 0.0;      // global-norm clipping; 0 disables
  // Steps at the start during which the selector is bypassed (all gates held
  // at 0.5, no regularizers) so the backbone learns to use EEG first.
  std::size_t selector_delay = 0;
  double selector_lr_scale = 1.0;  // learning-rate multiplier for selector parameters
  // Std of Gaussian noise added to the gated EEG during training; 0 disables.
  double eeg_noise_floor = 0.0;
  // Steps of backbone training with the finalized subset gate fixed, run
  // after thresholding; 0 disables.
  std::size_t finetune_steps = 0;

  void validate() const {
    if (!(warmup_ratio > 0.0 && warmup_ratio < 1.0)) throw ConfigError("warmup_ratio must lie in (0, 1)");
    if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (!(max_lr > 0.0)) throw ConfigError("max_lr must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
      throw ConfigError("Adam betas must lie in [0, 1)");
    if (grad_clip < 0.0) throw ConfigError("grad_clip must be non-negative");
    if (!(selector_lr_scale > 0.0)) throw ConfigError("selector_lr_scale must be positive");
    if (!(eeg_noise_floor >= 0.0)) throw ConfigError("eeg_noise_floor must be non-negative");
    weights.validate();
    reg.validate();
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"max_lr", c.max_lr},         {"warmup_ratio", c.warmup_ratio}, {"epochs", c.epochs},
       {"batch_size", c.batch_size}, {"adam_beta1", c.adam_beta1},     {"adam_beta2", c.adam_beta2},
       {"adam_eps", c.adam_eps},     {"seed", c.seed},                 {"weights", c.weights},
       {"reg", c.reg},               {"max_steps", c.max_steps},       {"eval_every", c.eval_every},
       {"grad_clip", c.grad_clip},   {"selector_delay", c.selector_delay},
       {"selector_lr_scale", c.selector_lr_scale}, {"eeg_noise_floor", c.eeg_noise_floor},
       {"finetune_steps", c.finetune_steps}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.max_lr = j.value("max_lr", d.max_lr);
  c.warmup_ratio = j.value("warmup_ratio", d.warmup_ratio);
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.adam_beta1 = j.value("adam_beta1", d.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", d.adam_beta2);
  c.adam_eps = j.value("adam_eps", d.adam_eps);
  c.seed = j.value("seed", d.seed);
  c.weights = j.value("weights", d.weights);
  c.reg = j.value("reg", d.reg);
  c.max_steps = j.value("max_steps", d.max_steps);
  c.eval_every = j.value("eval_every", d.eval_every);
  c.grad_clip = j.value("grad_clip", d.grad_clip);
  c.selector_delay = j.value("selector_delay", d.selector_delay);
  c.selector_lr_scale = j.value("selector_lr_scale", d.selector_lr_scale);
  c.eeg_noise_floor = j.value("eeg_noise_floor", d.eeg_noise_floor);
  c.finetune_steps = j.value("finetune_steps", d.finetune_steps);
  c.validate();
}

// -------------------------------------------------------------------- splits

struct SplitSpec {
  std::size_t n_test = 5;
  std::size_t n_val = 2;
  std::uint64_t seed = 0;
};

inline void to_json(nlohmann::json& j, const SplitSpec& s) {
  j = {{"n_test", s.n_test}, {"n_val", s.n_val}, {"seed", s.seed}};
}
inline void from_json(const nlohmann::json& j, SplitSpec& s) {
  SplitSpec d;
  s.n_test = j.value("n_test", d.n_test);
  s.n_val = j.value("n_val", d.n_val);
  s.seed = j.value("seed", d.seed);
}

struct Splits {
  std::vector<io::ManifestEntry> train, val, test;
};

/// Per subject, draws n_test then n_val trials without replacement; the rest
/// train. Excluded trials are ignored. Subjects are visited in sorted order.
inline Splits split_dataset(const io::Manifest& manifest, const SplitSpec& spec) {
  std::map<std::string, std::vector<io::ManifestEntry>> by_subject;
  std::set<std::string> ids;
  for (const auto& t : manifest.trials) {
    if (!ids.insert(t.id).second) throw DataError("manifest: duplicate trial id " + t.id);
    if (!t.excluded) by_subject[t.subject].push_back(t);
  }
  Splits out;
  Rng rng(spec.seed);
  for (auto& [subject, trials] : by_subject) {
    if (spec.n_test + spec.n_val >= trials.size())
      throw DataError("subject " + subject + " has " + std::to_string(trials.size()) + " trials; need more than " +
                      std::to_string(spec.n_test + spec.n_val));
    Rng sub = rng.fork(std::hash<std::string>{}(subject));
    sub.shuffle(trials.begin(), trials.end());
    for (std::size_t i = 0; i < trials.size(); ++i) {
      auto& dst = i < spec.n_test ? out.test : i < spec.n_test + spec.n_val ? out.val : out.train;
      dst.push_back(trials[i]);
    }
  }
  for (auto* part : {&out.train, &out.val, &out.test})
    std::sort(part->begin(), part->end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

// ------------------------------------------------------------------ schedule

/// Linear warm-up to max_lr over warmup_ratio * total_steps, then cosine
/// annealing to zero at total_steps.
inline double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (total_steps == 0) return 0.0;
  if (step > total_steps) throw ConfigError("lr_at: step beyond schedule");
  const double warm = cfg.warmup_ratio * static_cast<double>(total_steps);
  const auto s = static_cast<double>(step);
  if (s < warm) return cfg.max_lr * s / warm;
  const double span = static_cast<double>(total_steps) - warm;
  const double p = span > 0.0 ? (s - warm) / span : 1.0;
  return cfg.max_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * p));
}

// --------------------------------------------------------------------- Adam

class Adam {
 public:
  Adam(const nn::ParamList<float>& params, const TrainConfig& cfg)
      : beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.size(), 0.0);
      v_.emplace_back(p->value.size(), 0.0);
      scale_.push_back(p->name.starts_with("selector.") ? cfg.selector_lr_scale : 1.0);
    }
  }

  void step(const nn::ParamList<float>& params, double lr) {
    if (params.size() != m_.size()) throw InvariantError("Adam: parameter list changed");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto* p = params[k];
      auto& m = m_[k];
      auto& v = v_[k];
      const double step_lr = lr * scale_[k];
      for (std::size_t i = 0; i < m.size(); ++i) {
        const double g = p->grad[i];
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
        const double upd = step_lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
        p->value[i] = static_cast<float>(p->value[i] - upd);
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
  std::vector<double> scale_;
};

// ------------------------------------------------------------------ examples

struct Example {
  Tensor<float> mixture;  // [1 x T]
  Tensor<float> target;   // [1 x T]
  Tensor<float> eeg;      // [|S| x T_e]
  std::string id;
};

/// Converts segments to float examples, keeping only the candidate EEG rows.
inline std::vector<Example> make_examples(const std::vector<dataio::Segment>& segments,
                                          const std::vector<std::size_t>& candidate_rows) {
  std::vector<Example> out;
  out.reserve(segments.size());
  for (const auto& s : segments) {
    s.validate();
    Example e;
    const std::size_t n = s.mixture.size();
    e.mixture = Tensor<float>({1, n}, std::vector<float>(s.mixture.samples.begin(), s.mixture.samples.end()));
    e.target = Tensor<float>({1, n}, std::vector<float>(s.target.samples.begin(), s.target.samples.end()));
    e.eeg = dataio::select_rows(s.eeg, candidate_rows).cast<float>();
    e.id = s.trial_id + "#" + std::to_string(s.index);
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<double> to_double(const Tensor<float>& t) { return {t.storage().begin(), t.storage().end()}; }

struct EvalResult {
  std::vector<double> si_sdr;           // per example
  std::vector<double> si_sdr_unprocessed;
  double mean() const {
    double s = 0;
    for (double v : si_sdr) s += v;
    return si_sdr.empty() ? 0.0 : s / static_cast<double>(si_sdr.size());
  }
  double mean_improvement() const {
    double s = 0;
    for (std::size_t i = 0; i < si_sdr.size(); ++i) s += si_sdr[i] - si_sdr_unprocessed[i];
    return si_sdr.empty() ? 0.0 : s / static_cast<double>(si_sdr.size());
  }
};

inline EvalResult evaluate(Extractor<float>& model, const std::vector<Example>& data,
                           GateMode mode = GateMode::kSelector, const std::vector<double>* gate = nullptr) {
  ad::NoGradGuard guard;
  EvalResult r;
  for (const auto& ex : data) {
    const auto out = model.forward(ex.mixture, ex.eeg, mode, gate);
    const auto ref = to_double(ex.target);
    r.si_sdr.push_back(objectives::si_sdr(to_double(out.estimate.value()), ref));
    r.si_sdr_unprocessed.push_back(objectives::si_sdr(to_double(ex.mixture), ref));
  }
  return r;
}

// --------------------------------------------------------------------- train

struct LogRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0;
  double loss = 0;
  double si_sdr = 0;
  double discretization = 0;
  double cardinality = 0;
  std::optional<double> val_si_sdr;
};

inline nlohmann::json to_json(const LogRecord& r) {
  nlohmann::json j = {{"step", r.step},     {"epoch", r.epoch},
                      {"lr", r.lr},         {"loss", r.loss},
                      {"si_sdr", r.si_sdr}, {"l_d", r.discretization},
                      {"l_reg", r.cardinality}};
  if (r.val_si_sdr) j["val_si_sdr"] = *r.val_si_sdr;
  return j;
}

struct TrainHooks {
  fs::path out_dir;       // empty: keep everything in memory
  nlohmann::json meta;    // stored in every checkpoint
  std::function<void(const LogRecord&)> on_log;
};

struct TrainResult {
  std::size_t total_steps = 0;
  std::optional<double> best_val_si_sdr;
  std::size_t best_step = 0;
  Checkpoint best;
  Checkpoint last;
  std::vector<LogRecord> log;
};

inline std::size_t total_steps(std::size_t n_train, const TrainConfig& cfg) {
  if (cfg.max_steps > 0) return cfg.max_steps;
  const std::size_t per_epoch = (n_train + cfg.batch_size - 1) / cfg.batch_size;
  return cfg.epochs * per_epoch;
}

namespace detail {

inline void dump_nan(const fs::path& out_dir, std::size_t step, const std::vector<const Example*>& batch,
                     const std::string& what) {
  if (out_dir.empty()) return;
  nlohmann::json ids = nlohmann::json::array();
  nlohmann::json stats = nlohmann::json::array();
  for (const auto* e : batch) {
    ids.push_back(e->id);
    double mx = 0;
    for (float v : e->mixture.storage()) mx = std::max(mx, std::abs(static_cast<double>(v)));
    stats.push_back({{"id", e->id}, {"mixture_peak", mx}, {"samples", e->mixture.size()}});
  }
  io::write_json(out_dir / "nan_dump.json", {{"step", step}, {"reason", what}, {"batch", ids}, {"stats", stats}});
}

}  // namespace detail

/// Mini-batch Adam on the combined loss. Validation SI-SDR is computed every
/// `eval_every` steps (default: each epoch) and at the end; the best
/// validation state is kept. With no validation data the last state is best.
/// A `fixed_gate` replaces the selector for every step and every validation.
inline TrainResult train(Extractor<float>& model, const std::vector<Example>& train_set,
                         const std::vector<Example>& val_set, const TrainConfig& cfg, const TrainHooks& hooks = {},
                         const std::vector<double>* fixed_gate = nullptr) {
  cfg.validate();
  const auto params = model.parameters();
  const std::size_t n_sel = model.config().eeg_in_channels;
  TrainResult res;
  res.total_steps = train_set.empty() ? 0 : total_steps(train_set.size(), cfg);
  auto meta_at = [&](std::size_t step, std::optional<double> val) {
    nlohmann::json m = hooks.meta;
    m["step"] = step;
    if (val) m["val_si_sdr"] = *val;
    return m;
  };
  res.best = Checkpoint::capture(params, meta_at(0, std::nullopt));
  res.last = res.best;

  std::ofstream log_file;
  if (!hooks.out_dir.empty()) {
    fs::create_directories(hooks.out_dir);
    log_file.open(hooks.out_dir / "log.jsonl");
    if (!log_file) throw DataError("cannot write log in " + hooks.out_dir.string());
  }
  auto emit = [&](const LogRecord& r) {
    res.log.push_back(r);
    if (log_file) log_file << to_json(r).dump() << '\n' << std::flush;
    if (hooks.on_log) hooks.on_log(r);
  };
  auto validate_now = [&](LogRecord& rec) {
    if (val_set.empty()) return;
    const double v =
        (fixed_gate ? evaluate(model, val_set, GateMode::kFixed, fixed_gate) : evaluate(model, val_set)).mean();
    rec.val_si_sdr = v;
    // States from before the selector is active are not candidates.
    if (!fixed_gate && model.has_selector() && rec.step <= cfg.selector_delay) return;
    if (!res.best_val_si_sdr || v > *res.best_val_si_sdr) {
      res.best_val_si_sdr = v;
      res.best_step = rec.step;
      res.best = Checkpoint::capture(params, meta_at(rec.step, v));
    }
  };

  if (res.total_steps == 0) return res;

  Adam adam(params, cfg);
  const std::vector<double> neutral_gate(n_sel, 0.5);
  Rng order_rng = Rng(cfg.seed).fork(0x0bde7);
  Rng noise_rng = Rng(cfg.seed).fork(0xf1002);
  std::vector<std::size_t> order(train_set.size());
  std::size_t cursor = order.size(), epoch = 0;
  const std::size_t per_epoch = (train_set.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t eval_every = cfg.eval_every > 0 ? cfg.eval_every : per_epoch;

  for (std::size_t step = 0; step < res.total_steps; ++step) {
    if (cursor >= order.size()) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      order_rng.shuffle(order.begin(), order.end());
      cursor = 0;
      if (step > 0) ++epoch;
    }
    std::vector<const Example*> batch;
    const std::size_t end = std::min(cursor + cfg.batch_size, order.size());
    for (; cursor < end; ++cursor) batch.push_back(&train_set[order[cursor]]);
    for (auto* p : params) p->zero_grad();
    LogRecord rec;
    rec.step = step + 1;
    rec.epoch = epoch;
    rec.lr = lr_at(step + 1, res.total_steps, cfg);
    const bool delayed = !fixed_gate && model.has_selector() && step < cfg.selector_delay;
    for (const auto* ex : batch) {
      Tensor<float> noise;
      if (cfg.eeg_noise_floor > 0.0) {
        noise = Tensor<float>(ex->eeg.shape());
        for (auto& v : noise.storage()) v = static_cast<float>(cfg.eeg_noise_floor * noise_rng.normal());
      }
      const Tensor<float>* floor = cfg.eeg_noise_floor > 0.0 ? &noise : nullptr;
      const std::vector<double>* gate = fixed_gate ? fixed_gate : delayed ? &neutral_gate : nullptr;
      const auto out =
          model.forward(ex->mixture, ex->eeg, gate ? GateMode::kFixed : GateMode::kSelector, gate, floor);
      const auto terms = objectives::total_loss(out.estimate, ex->target, out.selection, cfg.weights, cfg.reg,
                                                n_sel, batch.size());
      const double share = terms.total.item();
      if (!std::isfinite(share)) {
        detail::dump_nan(hooks.out_dir, rec.step, batch, "non-finite loss");
        throw NumericalError("non-finite loss at step " + std::to_string(rec.step) + " (example " + ex->id + ")");
      }
      ad::backward(terms.total);
      rec.loss += share;
      rec.si_sdr += terms.si_sdr / static_cast<double>(batch.size());
      rec.discretization += terms.discretization / static_cast<double>(batch.size());
      rec.cardinality += terms.cardinality / static_cast<double>(batch.size());
    }
    double norm2 = 0;
    for (const auto* p : params)
      for (float g : p->grad.storage()) norm2 += static_cast<double>(g) * g;
    if (!std::isfinite(norm2)) {
      detail::dump_nan(hooks.out_dir, rec.step, batch, "non-finite gradient");
      throw NumericalError("non-finite gradient at step " + std::to_string(rec.step));
    }
    if (cfg.grad_clip > 0.0 && std::sqrt(norm2) > cfg.grad_clip) {
      const auto s = static_cast<float>(cfg.grad_clip / std::sqrt(norm2));
      for (auto* p : params)
        for (float& g : p->grad.storage()) g *= s;
    }
    adam.step(params, rec.lr);
    if (rec.step % eval_every == 0 || rec.step == res.total_steps) validate_now(rec);
    emit(rec);
  }
  res.last = Checkpoint::capture(params, meta_at(res.total_steps, std::nullopt));
  if (val_set.empty()) {
    res.best = res.last;
    res.best_step = res.total_steps;
  }
  if (!hooks.out_dir.empty()) {
    save_checkpoint(hooks.out_dir / "best.ckpt", res.best);
    save_checkpoint(hooks.out_dir / "last.ckpt", res.last);
  }
  return res;
}

// --------------------------------------------------------------------- sweep

struct SweepRow {
  double gamma = 0;
  std::size_t subset_size = 0;
  std::vector<std::size_t> subset;
  std::vector<double> mean_selection;
  double si_sdr_soft = 0;
  double si_sdr_hard = 0;
  double si_sdr_unprocessed = 0;
  std::optional<double> best_val_si_sdr;
  std::string error;
};

struct SweepInputs {
  model::ModelConfig model;
  selection::SelectorConfig selector;
  TrainConfig train;
  geometry::CandidateSet candidates;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

/// Runs one training and subset finalization for a trained extractor.
inline selection::SelectedSubset finalize(Extractor<float>& model, const std::vector<Example>& val_set,
                                          double threshold, const geometry::CandidateSet& candidates) {
  std::vector<std::vector<double>> sels;
  for (const auto& e : val_set) sels.push_back(model.select(e.eeg));
  return selection::finalize_subset(sels, threshold, candidates);
}

/// Independent training per gamma from the same seed, then subset
/// finalization on the validation set and test evaluation with soft gates
/// and with the binary subset gate. A failing gamma leaves an error row.
inline std::vector<SweepRow> gamma_sweep(const std::vector<double>& gammas, const SweepInputs& in,
                                         const std::vector<Example>& train_set, const std::vector<Example>& val_set,
                                         const std::vector<Example>& test_set, const fs::path& out_dir = {},
                                         const std::function<void(const SweepRow&)>& on_row = {}) {
  std::vector<SweepRow> rows;
  for (double g : gammas) {
    SweepRow row;
    row.gamma = g;
    try {
      TrainConfig tc = in.train;
      tc.weights.gamma = g;
      tc.validate();
      Extractor<float> model(in.model, in.selector, in.seed);
      TrainHooks hooks;
      if (!out_dir.empty()) {
        std::ostringstream name;
        name << "gamma_" << g;
        hooks.out_dir = out_dir / name.str();
      }
      hooks.meta = {{"gamma", g}};
      auto res = train(model, train_set, val_set, tc, hooks);
      res.best.restore(model.parameters());
      row.best_val_si_sdr = res.best_val_si_sdr;
      const auto& sel_data = val_set.empty() ? train_set : val_set;
      const auto subset = finalize(model, sel_data, in.threshold, in.candidates);
      row.subset = subset.indices;
      row.subset_size = subset.indices.size();
      row.mean_selection = subset.mean_selection;
      const auto& eval_data = test_set.empty() ? sel_data : test_set;
      const auto soft = evaluate(model, eval_data);
      const auto gate = selection::subset_gate(subset, in.candidates.size());
      if (tc.finetune_steps > 0) {
        TrainConfig ft = tc;
        ft.max_steps = tc.finetune_steps;
        ft.selector_delay = 0;
        TrainHooks ft_hooks = hooks;
        if (!hooks.out_dir.empty()) ft_hooks.out_dir = hooks.out_dir / "finetune";
        train(model, train_set, val_set, ft, ft_hooks, &gate).best.restore(model.parameters());
      }
      const auto hard = evaluate(model, eval_data, GateMode::kFixed, &gate);
      row.si_sdr_soft = soft.mean();
      row.si_sdr_hard = hard.mean();
      double unp = 0;
      for (double v : soft.si_sdr_unprocessed) unp += v;
      row.si_sdr_unprocessed = eval_data.empty() ? 0 : unp / static_cast<double>(eval_data.size());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "gamma,subset_size,si_sdr_soft,si_sdr_hard,si_sdr_unprocessed,best_val_si_sdr,subset,error\n";
  for (const auto& r : rows) {
    std::string subset;
    for (std::size_t i = 0; i < r.subset.size(); ++i) subset += (i ? " " : "") + std::to_string(r.subset[i]);
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << r.gamma << ',' << r.subset_size << ',' << r.si_sdr_soft << ',' << r.si_sdr_hard << ','
       << r.si_sdr_unprocessed << ',' << (r.best_val_si_sdr ? std::to_string(*r.best_val_si_sdr) : "") << ','
       << subset << ',' << err << '\n';
  }
  return os.str();
}

inline std::string sweep_summary(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  for (const auto& r : rows) {
    os << "gamma " << r.gamma << ": ";
    if (!r.error.empty())
      os << "failed (" << r.error << ")";
    else
      os << r.subset_size << " channels, SI-SDR soft " << r.si_sdr_soft << " dB, hard " << r.si_sdr_hard
         << " dB (mixture " << r.si_sdr_unprocessed << " dB)";
    os << '\n';
  }
  return os.str();
}

}  // namespace gcbase::training
