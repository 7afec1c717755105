// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment configuration and dataset assembly shared by the command-line
// tool and the tests: layout and region, synthetic or on-disk data,
// preprocessing, splits, segmentation and model construction.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/dataio.hpp"
#include "gcbase/errors.hpp"
#include "gcbase/extractor.hpp"
#include "gcbase/geometry.hpp"
#include "gcbase/io.hpp"
#include "gcbase/model.hpp"
#include "gcbase/training.hpp"

namespace gcbase::experiment {

namespace fs = std::filesystem;

struct SyntheticData {
  dataio::SynthSpec spec;
  std::size_t subjects = 1;
  std::size_t trials_per_subject = 10;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string layout;  // path; empty selects the built-in synthetic layout
  geometry::RegionSpec region = geometry::RegionSpec::headphone();
  std::optional<SyntheticData> synthetic;
  std::string manifest;  // path to an on-disk dataset manifest
  dataio::PreprocessConfig preprocess;
  double segment_s = 2.0;
  std::string model_profile = "tiny";  // "tiny" or "full"
  nlohmann::json model_overrides = nlohmann::json::object();
  bool use_selector = true;
  selection::SelectorConfig selector;
  training::TrainConfig train;
  training::SplitSpec split;
  double threshold = 0.5;
  std::vector<double> gammas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::map<std::string, std::string> metrics;  // name -> external command
  fs::path base_dir;                           // relative paths resolve here

  fs::path resolve(const std::string& p) const {
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  }

  void validate() const {
    if (!synthetic && manifest.empty()) throw ConfigError("config: data needs either 'synthetic' or 'manifest'");
    if (!(segment_s > 0.0)) throw ConfigError("config: segment_s must be positive");
    if (model_profile != "tiny" && model_profile != "full")
      throw ConfigError("config: model.profile must be 'tiny' or 'full'");
    if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("config: threshold must lie in (0, 1)");
    for (double g : gammas)
      if (!(g >= 0.0)) throw ConfigError("config: gammas must be non-negative");
    region.validate();
    train.validate();
    if (synthetic) synthetic->spec.validate();
    if (!layout.empty() && !fs::exists(resolve(layout)))
      throw ConfigError("config: layout file " + resolve(layout).string() + " does not exist");
    if (!manifest.empty() && !synthetic && !fs::exists(resolve(manifest)))
      throw ConfigError("config: manifest " + resolve(manifest).string() + " does not exist");
  }
};

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json data = nlohmann::json::object();
  if (c.synthetic)
    data["synthetic"] = {{"spec", c.synthetic->spec},
                         {"subjects", c.synthetic->subjects},
                         {"trials_per_subject", c.synthetic->trials_per_subject}};
  if (!c.manifest.empty()) data["manifest"] = c.manifest;
  nlohmann::json model = c.model_overrides;
  model["profile"] = c.model_profile;
  nlohmann::json sel = c.selector;
  sel["enabled"] = c.use_selector;
  nlohmann::json train = c.train;
  train.erase("weights");
  train.erase("reg");
  return {{"seed", c.seed},
          {"layout", c.layout},
          {"region", c.region},
          {"data", data},
          {"preprocess", c.preprocess},
          {"segment_s", c.segment_s},
          {"model", model},
          {"selector", sel},
          {"train", train},
          {"loss", c.train.weights},
          {"regularizer", c.train.reg},
          {"split", c.split},
          {"threshold", c.threshold},
          {"gammas", c.gammas},
          {"metrics", c.metrics}};
}

/// Parses a config object. Unknown top-level keys are rejected so that typos
/// surface as configuration errors.
inline ExperimentConfig from_json(const nlohmann::json& j, const fs::path& base_dir = {}) {
  static const std::vector<std::string> known{"seed",   "layout", "region", "data",  "preprocess", "segment_s",
                                              "model",  "selector", "train", "loss", "regularizer", "split",
                                              "threshold", "gammas", "metrics"};
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end()) throw ConfigError("config: unknown key '" + k + "'");
  ExperimentConfig c;
  c.base_dir = base_dir;
  try {
    c.seed = j.value("seed", c.seed);
    c.layout = j.value("layout", c.layout);
    if (j.contains("region")) {
      // Either an inline region object or the path of a JSON file holding one.
      const auto& r = j.at("region");
      c.region = r.is_string() ? io::read_json(c.resolve(r.get<std::string>())).get<geometry::RegionSpec>()
                               : r.get<geometry::RegionSpec>();
    }
    if (j.contains("data")) {
      const auto& d = j.at("data");
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        SyntheticData sd;
        if (s.contains("spec")) sd.spec = s.at("spec").get<dataio::SynthSpec>();
        sd.subjects = s.value("subjects", sd.subjects);
        sd.trials_per_subject = s.value("trials_per_subject", sd.trials_per_subject);
        c.synthetic = sd;
      }
      c.manifest = d.value("manifest", std::string{});
    }
    if (j.contains("preprocess")) c.preprocess = j.at("preprocess").get<dataio::PreprocessConfig>();
    c.segment_s = j.value("segment_s", c.segment_s);
    if (j.contains("model")) {
      c.model_overrides = j.at("model");
      c.model_profile = c.model_overrides.value("profile", c.model_profile);
      c.model_overrides.erase("profile");
    }
    if (j.contains("selector")) {
      c.use_selector = j.at("selector").value("enabled", true);
      c.selector = j.at("selector").get<selection::SelectorConfig>();
    }
    nlohmann::json train = j.value("train", nlohmann::json::object());
    if (j.contains("loss")) train["weights"] = j.at("loss");
    if (j.contains("regularizer")) train["reg"] = j.at("regularizer");
    if (!train.contains("seed")) train["seed"] = c.seed;
    c.train = train.get<training::TrainConfig>();
    if (j.contains("split")) c.split = j.at("split").get<training::SplitSpec>();
    if (!j.contains("split") || !j.at("split").contains("seed")) c.split.seed = c.seed;
    c.threshold = j.value("threshold", c.threshold);
    c.gammas = j.value("gammas", c.gammas);
    c.metrics = j.value("metrics", c.metrics);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Copy with relative layout/manifest paths made absolute, for storing in
/// run directories and checkpoints.
inline ExperimentConfig absolutized(const ExperimentConfig& c) {
  ExperimentConfig out = c;
  if (!out.layout.empty()) out.layout = fs::absolute(c.resolve(c.layout)).lexically_normal().string();
  if (!out.manifest.empty()) out.manifest = fs::absolute(c.resolve(c.manifest)).lexically_normal().string();
  out.base_dir.clear();
  return out;
}

/// Overrides every seed in the config (data, split, initialization, batching).
inline ExperimentConfig with_seed(ExperimentConfig c, std::uint64_t seed) {
  c.seed = seed;
  c.train.seed = seed;
  c.split.seed = seed;
  return c;
}

inline ExperimentConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = io::read_json(path);
  } catch (const ParseError& e) {
    throw ConfigError(e.what());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return from_json(j, path.parent_path());
}

// ------------------------------------------------------------------- dataset

struct Dataset {
  io::Manifest manifest;
  std::map<std::string, dataio::PairedTrial> trials;
};

/// Deterministic synthetic dataset: trial k of subject s uses its own seed
/// derived from `seed`, and mixes target and interferer at spec.snr_db.
inline Dataset synthesize(const SyntheticData& sd, const geometry::ElectrodeLayout& layout, std::uint64_t seed) {
  if (sd.spec.n_channels != layout.size())
    throw ConfigError("synthetic data has " + std::to_string(sd.spec.n_channels) + " channels, layout has " +
                      std::to_string(layout.size()));
  Dataset ds;
  ds.manifest.layout_id = layout.id();
  ds.manifest.audio_rate_hz = sd.spec.audio_rate_hz;
  ds.manifest.eeg_rate_hz = sd.spec.eeg_rate_hz;
  ds.manifest.extra = {{"synthetic", sd.spec}, {"seed", seed}};
  Rng root(seed);
  for (std::size_t s = 0; s < sd.subjects; ++s) {
    for (std::size_t k = 0; k < sd.trials_per_subject; ++k) {
      char id[32];
      std::snprintf(id, sizeof id, "s%02zu_t%03zu", s + 1, k + 1);
      const auto trial = dataio::synth_trial(sd.spec, root.next());
      const auto mix = dataio::mix_at_snr(trial.target, trial.interferer, sd.spec.snr_db);
      dataio::PairedTrial p{id, "s" + std::to_string(s + 1), mix.mixture, mix.target, mix.interferer, trial.eeg};
      p.eeg.layout_id = layout.id();
      ds.manifest.trials.push_back({id, p.subject, std::string("trials/") + id, false, ""});
      ds.trials.emplace(id, std::move(p));
    }
  }
  return ds;
}

inline void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  for (const auto& e : ds.manifest.trials) io::write_trial(dir / e.dir, ds.trials.at(e.id));
  io::write_manifest(dir / "manifest.json", ds.manifest);
}

inline Dataset load_dataset(const fs::path& manifest_path, const geometry::ElectrodeLayout& layout) {
  Dataset ds;
  ds.manifest = io::read_manifest(manifest_path);
  if (!ds.manifest.layout_id.empty() && ds.manifest.layout_id != layout.id())
    throw DataError("manifest was recorded with layout " + ds.manifest.layout_id + ", config uses " + layout.id());
  for (const auto& e : ds.manifest.trials) {
    if (e.excluded) continue;
    auto t = io::read_trial(manifest_path.parent_path() / e.dir, e, layout.id());
    t.eeg.validate(layout.size());
    ds.trials.emplace(e.id, std::move(t));
  }
  return ds;
}

/// Resamples audio, preprocesses EEG and cuts segments for `entries`.
inline std::vector<dataio::Segment> prepare_segments(const Dataset& ds, const std::vector<io::ManifestEntry>& entries,
                                                     const dataio::PreprocessConfig& pre,
                                                     const geometry::ElectrodeLayout& layout, double segment_s) {
  std::vector<dataio::Segment> out;
  for (const auto& e : entries) {
    dataio::PairedTrial t = ds.trials.at(e.id);
    t.mixture = dataio::resample(t.mixture, pre.audio_rate_hz);
    t.target = dataio::resample(t.target, pre.audio_rate_hz);
    t.eeg = dataio::preprocess_eeg(t.eeg, pre, layout.mastoid_indices());
    auto segs = dataio::segment(t, segment_s);
    out.insert(out.end(), std::make_move_iterator(segs.begin()), std::make_move_iterator(segs.end()));
  }
  return out;
}

// ---------------------------------------------------------------- prepared

struct Prepared {
  ExperimentConfig cfg;
  geometry::ElectrodeLayout layout;
  geometry::CandidateSet candidates;
  Dataset dataset;
  training::Splits splits;
  std::vector<training::Example> train, val, test;
  model::ModelConfig model;
};

inline geometry::ElectrodeLayout load_layout(const ExperimentConfig& cfg) {
  return cfg.layout.empty() ? geometry::synthetic_layout() : geometry::load_layout(cfg.resolve(cfg.layout));
}

inline model::ModelConfig build_model_config(const ExperimentConfig& cfg, std::size_t n_candidates) {
  model::ModelConfig base = cfg.model_profile == "tiny"
                                ? model::ModelConfig::tiny(n_candidates, cfg.preprocess.audio_rate_hz,
                                                           cfg.preprocess.eeg_rate_hz)
                                : model::ModelConfig{};
  base.eeg_in_channels = n_candidates;
  base.audio_rate_hz = cfg.preprocess.audio_rate_hz;
  base.eeg_rate_hz = cfg.preprocess.eeg_rate_hz;
  nlohmann::json j = base;
  for (const auto& [k, v] : cfg.model_overrides.items()) {
    if (!j.contains(k)) throw ConfigError("config: unknown model field '" + k + "'");
    if (k == "eeg_in_channels" || k == "audio_rate_hz" || k == "eeg_rate_hz")
      throw ConfigError("config: model." + k + " is derived from the data and region");
    j[k] = v;
  }
  auto m = j.get<model::ModelConfig>();
  m.validate();
  return m;
}

inline Dataset load_data(const ExperimentConfig& cfg, const geometry::ElectrodeLayout& layout) {
  if (cfg.synthetic) return synthesize(*cfg.synthetic, layout, cfg.seed);
  return load_dataset(cfg.resolve(cfg.manifest), layout);
}

inline Prepared prepare(const ExperimentConfig& cfg) {
  cfg.validate();
  Prepared p;
  p.cfg = cfg;
  p.layout = load_layout(cfg);
  p.candidates = geometry::hard_select(p.layout, cfg.region);
  p.dataset = load_data(cfg, p.layout);
  p.splits = training::split_dataset(p.dataset.manifest, cfg.split);
  auto examples = [&](const std::vector<io::ManifestEntry>& entries) {
    return training::make_examples(prepare_segments(p.dataset, entries, cfg.preprocess, p.layout, cfg.segment_s),
                                   p.candidates.indices());
  };
  p.train = examples(p.splits.train);
  p.val = examples(p.splits.val);
  p.test = examples(p.splits.test);
  if (p.train.empty()) throw DataError("no training segments (trials shorter than one segment?)");
  p.model = build_model_config(cfg, p.candidates.size());
  return p;
}

inline Extractor<float> build_extractor(const Prepared& p) {
  return Extractor<float>(p.model, p.cfg.use_selector ? std::optional(p.cfg.selector) : std::nullopt, p.cfg.seed);
}

/// Metadata stored with every checkpoint so `eval`/`select` can rebuild the run.
inline nlohmann::json checkpoint_meta(const Prepared& p) {
  return {{"format", "gcbase-run/1"},
          {"config", to_json(absolutized(p.cfg))},
          {"model", p.model},
          {"layout_id", p.layout.id()},
          {"candidates", p.candidates.indices()},
          {"gamma", p.cfg.train.weights.gamma}};
}

}  // namespace gcbase::experiment
