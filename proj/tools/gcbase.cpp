// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// gcbase: synthesize data, train and evaluate extractors, sweep the sparsity
// weight, finalize channel subsets and render topomaps.
//
// Errors leave a single JSON object on stderr:
//   {"error": {"kind": "...", "message": "...", "exit_code": N}}
// Exit codes: 0 success, 2 configuration, 3 data, 4 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gcbase/checkpoint.hpp"
#include "gcbase/experiment.hpp"
#include "gcbase/gradcheck.hpp"
#include "gcbase/objectives.hpp"

namespace fs = std::filesystem;
using namespace gcbase;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool config_required) {
  cmd->add_option("--seed", c.seed, "Seed for data synthesis, splits, initialization and batching");
  auto* opt = cmd->add_option("--config", c.config, "Experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("--out", c.out, "Output directory (created if missing)")->required();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

fs::path make_out(const std::string& out) {
  const fs::path p(out);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create output directory " + out + ": " + ec.message());
  return p;
}

experiment::ExperimentConfig load(const Common& c) {
  auto cfg = experiment::load_config(c.config);
  if (c.seed) cfg = experiment::with_seed(cfg, *c.seed);
  return cfg;
}

void save_config(const fs::path& dir, const experiment::ExperimentConfig& cfg) {
  io::write_json(dir / "config.json", experiment::to_json(experiment::absolutized(cfg)));
}

/// Rebuilds the prepared experiment stored in a checkpoint's metadata.
struct Restored {
  experiment::Prepared prep;
  Extractor<float> model;
};

Restored restore_run(const Common& c, const std::string& checkpoint) {
  const auto ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("config") || !ck.meta.contains("model"))
    throw DataError("checkpoint " + checkpoint + " carries no run metadata");
  auto cfg = c.config.empty() ? experiment::from_json(ck.meta.at("config")) : experiment::load_config(c.config);
  if (c.seed) cfg = experiment::with_seed(cfg, *c.seed);
  Restored r{experiment::prepare(cfg), {}};
  r.prep.model = ck.meta.at("model").get<model::ModelConfig>();
  if (r.prep.model.eeg_in_channels != r.prep.candidates.size())
    throw ConfigError("checkpoint expects " + std::to_string(r.prep.model.eeg_in_channels) +
                      " candidate channels, region yields " + std::to_string(r.prep.candidates.size()));
  r.model = experiment::build_extractor(r.prep);
  ck.restore(r.model.parameters());
  return r;
}

const std::vector<training::Example>& pick_split(const experiment::Prepared& p, const std::string& split) {
  if (split == "train") return p.train;
  if (split == "val") return p.val;
  if (split == "test") return p.test;
  throw ConfigError("unknown split '" + split + "' (expected train, val or test)");
}

objectives::MetricRegistry registry(const experiment::ExperimentConfig& cfg, const fs::path& out) {
  objectives::MetricRegistry reg;
  for (const auto& [name, command] : cfg.metrics) reg.add_external(name, command, out / "scratch");
  return reg;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

/// One CSV row per item plus a mean row; failed metrics leave empty cells.
std::string metrics_csv(const std::vector<std::string>& ids,
                        const std::vector<std::map<std::string, objectives::MetricResult>>& rows,
                        const std::vector<std::string>& names) {
  std::ostringstream os;
  os << "id";
  for (const auto& n : names) os << ',' << n;
  os << '\n';
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    os << ids[i];
    for (const auto& n : names) {
      os << ',';
      const auto it = rows[i].find(n);
      if (it != rows[i].end() && it->second.ok()) {
        os << fmt(*it->second.value);
        acc[n].first += *it->second.value;
        ++acc[n].second;
      }
    }
    os << '\n';
  }
  os << "mean";
  for (const auto& n : names) {
    os << ',';
    if (acc[n].second) os << fmt(acc[n].first / static_cast<double>(acc[n].second));
  }
  os << '\n';
  return os.str();
}

// ------------------------------------------------------------------ commands

int cmd_synth(const Common& c) {
  const auto cfg = load(c);
  if (!cfg.synthetic) throw ConfigError("synth requires data.synthetic in the config");
  const auto out = make_out(c.out);
  const auto layout = experiment::load_layout(cfg);
  const auto ds = experiment::synthesize(*cfg.synthetic, layout, cfg.seed);
  experiment::write_dataset(out, ds);
  geometry::save_layout(layout, out / "layout.csv");
  save_config(out, cfg);
  std::cout << "wrote " << ds.manifest.trials.size() << " trials to " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c, std::optional<double> gamma) {
  auto cfg = load(c);
  if (gamma) {
    cfg.train.weights.gamma = *gamma;
    cfg.validate();
  }
  const auto out = make_out(c.out);
  save_config(out, cfg);
  auto prep = experiment::prepare(cfg);
  auto model = experiment::build_extractor(prep);
  training::TrainHooks hooks;
  hooks.out_dir = out;
  hooks.meta = experiment::checkpoint_meta(prep);
  hooks.on_log = [](const training::LogRecord& r) {
    if (r.val_si_sdr)
      std::cout << "step " << r.step << " loss " << r.loss << " train SI-SDR " << r.si_sdr << " val SI-SDR "
                << *r.val_si_sdr << std::endl;
  };
  auto res = training::train(model, prep.train, prep.val, cfg.train, hooks);
  res.best.restore(model.parameters());
  json summary = {{"total_steps", res.total_steps}, {"best_step", res.best_step}};
  if (res.best_val_si_sdr) summary["best_val_si_sdr"] = *res.best_val_si_sdr;
  for (const auto& [name, data] : {std::pair{"val", &prep.val}, std::pair{"test", &prep.test}}) {
    if (data->empty()) continue;
    const auto e = training::evaluate(model, *data);
    summary[name] = {{"si_sdr", e.mean()}, {"si_sdr_improvement", e.mean_improvement()}, {"segments", data->size()}};
  }
  if (model.has_selector() && !prep.val.empty()) {
    const auto subset = training::finalize(model, prep.val, cfg.threshold, prep.candidates);
    const auto report = selection::subset_report(subset, prep.candidates, prep.layout, cfg.train.weights.gamma);
    io::write_json(out / "subset.json", report);
    summary["subset_size"] = subset.indices.size();
    if (cfg.train.finetune_steps > 0) {
      auto ft = cfg.train;
      ft.max_steps = cfg.train.finetune_steps;
      ft.selector_delay = 0;
      training::TrainHooks ft_hooks = hooks;
      ft_hooks.out_dir = out / "finetune";
      ft_hooks.meta["subset_indices"] = subset.indices;
      const auto gate = selection::subset_gate(subset, prep.candidates.size());
      training::train(model, prep.train, prep.val, ft, ft_hooks, &gate).best.restore(model.parameters());
      if (!prep.test.empty()) {
        const auto e = training::evaluate(model, prep.test, GateMode::kFixed, &gate);
        summary["finetuned_test"] = {{"si_sdr", e.mean()}, {"si_sdr_improvement", e.mean_improvement()}};
      }
    }
  }
  io::write_json(out / "summary.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& split, const std::string& subset_path,
             const std::string& estimate, const std::string& reference) {
  const auto out = make_out(c.out);
  if (!estimate.empty() || !reference.empty()) {
    if (estimate.empty() || reference.empty()) throw ConfigError("eval needs both --estimate and --reference");
    const auto est = io::read_wav(estimate);
    const auto ref = io::read_wav(reference);
    if (est.size() != ref.size()) throw DataError("estimate and reference differ in length");
    experiment::ExperimentConfig cfg;
    if (!c.config.empty()) cfg = load(c);
    const auto scores = objectives::evaluate_metrics(est, ref, registry(cfg, out));
    std::vector<std::string> names;
    for (const auto& [k, v] : scores) names.push_back(k);
    const auto csv = metrics_csv({fs::path(estimate).filename().string()}, {scores}, names);
    write_text(out / "metrics.csv", csv);
    std::cout << csv;
    return 0;
  }
  if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint, or --estimate with --reference");
  auto run = restore_run(c, checkpoint);
  const auto& data = pick_split(run.prep, split);
  if (data.empty()) throw DataError("split '" + split + "' holds no segments");
  std::vector<double> gate;
  GateMode mode = GateMode::kSelector;
  if (!subset_path.empty()) {
    const auto report = io::read_json(subset_path);
    const auto idx = report.at("subset_indices").get<std::vector<std::size_t>>();
    gate.assign(run.prep.candidates.size(), 0.0);
    for (auto i : idx) {
      const auto& cand = run.prep.candidates.indices();
      const auto it = std::find(cand.begin(), cand.end(), i);
      if (it == cand.end()) throw InvariantError("subset channel " + std::to_string(i) + " is not a candidate");
      gate[static_cast<std::size_t>(it - cand.begin())] = 1.0;
    }
    mode = GateMode::kFixed;
  }
  const auto reg = registry(run.prep.cfg, out);
  const double rate = run.prep.cfg.preprocess.audio_rate_hz;
  std::vector<std::string> ids;
  std::vector<std::map<std::string, objectives::MetricResult>> rows;
  ad::NoGradGuard guard;
  for (const auto& ex : data) {
    const auto o = run.model.forward(ex.mixture, ex.eeg, mode, mode == GateMode::kFixed ? &gate : nullptr);
    const dataio::Waveform est{training::to_double(o.estimate.value()), rate};
    const dataio::Waveform ref{training::to_double(ex.target), rate};
    const dataio::Waveform mix{training::to_double(ex.mixture), rate};
    auto scores = objectives::evaluate_metrics(est, ref, reg);
    scores["SI-SDR (mixture)"] = objectives::MetricResult{objectives::si_sdr(mix, ref), {}};
    ids.push_back(ex.id);
    rows.push_back(std::move(scores));
  }
  std::vector<std::string> names;
  for (const auto& [k, v] : rows.front()) names.push_back(k);
  const auto csv = metrics_csv(ids, rows, names);
  write_text(out / "metrics.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_sweep(const Common& c, const std::vector<double>& gammas) {
  auto cfg = load(c);
  if (!gammas.empty()) cfg.gammas = gammas;
  cfg.validate();
  if (!cfg.use_selector) throw ConfigError("sweep requires the selector to be enabled");
  const auto out = make_out(c.out);
  save_config(out, cfg);
  const auto prep = experiment::prepare(cfg);
  training::SweepInputs in{prep.model, cfg.selector, cfg.train, prep.candidates, cfg.threshold, cfg.seed};
  const auto rows = training::gamma_sweep(cfg.gammas, in, prep.train, prep.val, prep.test, out,
                                          [](const training::SweepRow& r) {
                                            std::cout << training::sweep_summary({r}) << std::flush;
                                          });
  write_text(out / "sweep.csv", training::sweep_csv(rows));
  write_text(out / "summary.txt", training::sweep_summary(rows));
  for (const auto& r : rows)
    if (!r.error.empty()) return 4;
  return 0;
}

int cmd_select(const Common& c, const std::string& checkpoint, std::optional<double> threshold) {
  const auto out = make_out(c.out);
  auto run = restore_run(c, checkpoint);
  if (!run.model.has_selector()) throw ConfigError("checkpoint has no selector");
  const double thr = threshold.value_or(run.prep.cfg.threshold);
  const auto& data = run.prep.val.empty() ? run.prep.train : run.prep.val;
  const auto subset = training::finalize(run.model, data, thr, run.prep.candidates);
  const auto report = selection::subset_report(subset, run.prep.candidates, run.prep.layout,
                                               run.prep.cfg.train.weights.gamma);
  io::write_json(out / "subset.json", report);
  const geometry::CandidateSet selected(subset.indices, run.prep.layout);
  geometry::emit_topomap(run.prep.layout, selected, run.prep.candidates, out / "topomap.svg");
  if (subset.fallback) std::cerr << "warning: " << subset.warning << "\n";
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_gradcheck(const Common& c, std::vector<std::string> components) {
  const auto out = make_out(c.out);
  if (components.empty()) components = gradcheck::components();
  const std::uint64_t seed = c.seed.value_or(0);
  json reports = json::array();
  bool ok = true;
  for (const auto& name : components) {
    const auto r = gradcheck::run(name, seed);
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.component << " max_rel_error=" << r.max_rel_error
              << " tol=" << r.tolerance << std::endl;
    reports.push_back(gradcheck::to_json(r));
    ok = ok && r.passed;
  }
  io::write_json(out / "gradcheck.json", {{"seed", seed}, {"reports", reports}});
  return ok ? 0 : 4;
}

int cmd_topomap(const Common& c, const std::string& layout_path, const std::string& subset_path,
                const std::vector<std::string>& labels) {
  const auto out = make_out(c.out);
  experiment::ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load(c);
  const auto layout = layout_path.empty() ? experiment::load_layout(cfg) : geometry::load_layout(layout_path);
  const auto candidates = geometry::hard_select(layout, cfg.region);
  geometry::CandidateSet selected = candidates;
  if (!subset_path.empty()) {
    auto idx = io::read_json(subset_path).at("subset_indices").get<std::vector<std::size_t>>();
    std::sort(idx.begin(), idx.end());
    selected = geometry::CandidateSet(idx, layout);
  } else if (!labels.empty()) {
    selected = geometry::candidate_from_labels(layout, labels);
  }
  geometry::emit_topomap(layout, selected, candidates, out / "topomap.svg");
  std::cout << selected.size() << " of " << candidates.size() << " candidates selected\n";
  return 0;
}

int fail(const std::string& kind, const std::string& message, int code) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}, {"exit_code", code}}}}.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain-assisted target speaker extraction with geometry-constrained EEG channel selection"};
  app.require_subcommand(1);

  Common synth_c, train_c, eval_c, sweep_c, select_c, grad_c, topo_c;

  auto* synth = app.add_subcommand("synth", "Write a synthetic paired audio/EEG dataset");
  add_common(synth, synth_c, true);

  std::optional<double> gamma;
  auto* train = app.add_subcommand("train", "Train an extractor; writes checkpoints, log and summary");
  add_common(train, train_c, true);
  train->add_option("--gamma", gamma, "Override the cardinality weight")->check(CLI::NonNegativeNumber);

  std::string eval_ckpt, eval_split = "test", eval_subset, eval_est, eval_ref;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on a split, or an estimate against a reference");
  add_common(eval, eval_c, false);
  eval->add_option("--checkpoint", eval_ckpt, "Checkpoint written by train");
  eval->add_option("--split", eval_split, "train, val or test")->capture_default_str();
  eval->add_option("--subset", eval_subset, "Subset report; gates the candidates to this binary subset");
  eval->add_option("--estimate", eval_est, "Estimate WAV file");
  eval->add_option("--reference", eval_ref, "Reference WAV file");

  std::vector<double> gammas;
  auto* sweep = app.add_subcommand("sweep", "Retrain per cardinality weight and tabulate subset size and SI-SDR");
  add_common(sweep, sweep_c, true);
  sweep->add_option("--gammas", gammas, "Cardinality weights (default: from config)")->delimiter(',');

  std::string select_ckpt;
  std::optional<double> threshold;
  auto* select = app.add_subcommand("select", "Finalize the channel subset of a trained checkpoint");
  add_common(select, select_c, false);
  select->add_option("--checkpoint", select_ckpt, "Checkpoint written by train")->required();
  select->add_option("--threshold", threshold, "Mean-selection threshold in (0, 1)");

  std::vector<std::string> components;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
  add_common(grad, grad_c, false);
  grad->add_option("--component", components, "Component(s) to check (default: all)")->delimiter(',');

  std::string topo_layout, topo_subset;
  std::vector<std::string> topo_labels;
  auto* topo = app.add_subcommand("topomap", "Render candidate and selected electrodes as SVG");
  add_common(topo, topo_c, false);
  topo->add_option("--layout", topo_layout, "Layout file (default: from config, else the synthetic layout)");
  topo->add_option("--subset", topo_subset, "Subset report to draw as selected");
  topo->add_option("--selected", topo_labels, "Selected labels (comma-separated)")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*synth) return cmd_synth(synth_c);
    if (*train) return cmd_train(train_c, gamma);
    if (*eval) return cmd_eval(eval_c, eval_ckpt, eval_split, eval_subset, eval_est, eval_ref);
    if (*sweep) return cmd_sweep(sweep_c, gammas);
    if (*select) return cmd_select(select_c, select_ckpt, threshold);
    if (*grad) return cmd_gradcheck(grad_c, components);
    if (*topo) return cmd_topomap(topo_c, topo_layout, topo_subset, topo_labels);
  } catch (const Error& e) {
    return fail(e.kind(), e.what(), e.exit_code());
  } catch (const nlohmann::json::exception& e) {
    return fail("data", e.what(), 3);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("data", e.what(), 3);
  } catch (const std::exception& e) {
    return fail("error", e.what(), 1);
  }
  return 0;
}
