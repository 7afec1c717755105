// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "gcbase/training.hpp"

using namespace gcbase;
using namespace gcbase::training;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gcbase_training_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

io::Manifest manifest(std::size_t subjects, std::size_t per_subject) {
  io::Manifest m;
  for (std::size_t s = 0; s < subjects; ++s)
    for (std::size_t t = 0; t < per_subject; ++t) {
      io::ManifestEntry e;
      e.subject = "s" + std::to_string(s);
      e.id = e.subject + "_t" + std::to_string(t);
      e.dir = "trials/" + e.id;
      m.trials.push_back(e);
    }
  return m;
}

std::set<std::string> ids(const std::vector<io::ManifestEntry>& v) {
  std::set<std::string> out;
  for (const auto& e : v) out.insert(e.id);
  return out;
}

constexpr std::size_t kRate = 1280, kEegRate = 128, kChannels = 4;

// Target is a slow-envelope tone; EEG row 0 follows its envelope.
std::vector<Example> toy_examples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (std::size_t k = 0; k < n; ++k) {
    Example e;
    e.mixture = Tensor<float>({1, kRate});
    e.target = Tensor<float>({1, kRate});
    e.eeg = Tensor<float>({kChannels, kEegRate});
    const double f = rng.uniform(60.0, 200.0), phase = rng.uniform(0.0, 6.28);
    for (std::size_t i = 0; i < kRate; ++i) {
      const double t = static_cast<double>(i) / kRate;
      const double env = 0.6 + 0.4 * std::sin(2.0 * std::numbers::pi * 3.0 * t + phase);
      e.target[i] = static_cast<float>(env * std::sin(2.0 * std::numbers::pi * f * t));
      e.mixture[i] = e.target[i] + static_cast<float>(0.5 * rng.normal());
    }
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t i = 0; i < kEegRate; ++i) {
        const double t = static_cast<double>(i) / kEegRate;
        const double env = std::sin(2.0 * std::numbers::pi * 3.0 * t + phase);
        e.eeg(c, i) = static_cast<float>((c == 0 ? env : 0.0) + 0.3 * rng.normal());
      }
    e.id = "toy" + std::to_string(k);
    out.push_back(std::move(e));
  }
  return out;
}

model::ModelConfig toy_model() {
  auto c = model::ModelConfig::tiny(kChannels, kRate, kEegRate);
  c.n_blocks = 2;
  return c;
}

selection::SelectorConfig toy_selector() {
  selection::SelectorConfig s;
  s.channels = 8;
  s.hidden = 16;
  s.n_blocks = 1;
  return s;
}

TrainConfig toy_train(std::size_t steps) {
  TrainConfig t;
  t.max_lr = 3e-3;
  t.batch_size = 2;
  t.max_steps = steps;
  t.eval_every = 5;
  t.seed = 11;
  t.weights.gamma = 0.2;
  return t;
}

}  // namespace

TEST(Splits, ThirtyTrialsLeaveTwentyThreeForTraining) {
  const auto s = split_dataset(manifest(1, 30), SplitSpec{5, 2, 1});
  EXPECT_EQ(s.train.size(), 23u);
  EXPECT_EQ(s.val.size(), 2u);
  EXPECT_EQ(s.test.size(), 5u);
}

TEST(Splits, PerSubjectDisjointAndCovering) {
  const auto m = manifest(3, 12);
  const auto s = split_dataset(m, SplitSpec{2, 1, 4});
  EXPECT_EQ(s.test.size(), 6u);
  EXPECT_EQ(s.val.size(), 3u);
  std::set<std::string> all;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& id : ids(*part)) EXPECT_TRUE(all.insert(id).second) << id << " appears twice";
  EXPECT_EQ(all.size(), m.trials.size());
  std::map<std::string, int> test_per_subject;
  for (const auto& e : s.test) ++test_per_subject[e.subject];
  for (const auto& [subject, n] : test_per_subject) EXPECT_EQ(n, 2) << subject;
}

TEST(Splits, DeterministicForSeed) {
  const auto m = manifest(2, 15);
  EXPECT_EQ(ids(split_dataset(m, SplitSpec{3, 2, 9}).test), ids(split_dataset(m, SplitSpec{3, 2, 9}).test));
  EXPECT_NE(ids(split_dataset(m, SplitSpec{3, 2, 9}).test), ids(split_dataset(m, SplitSpec{3, 2, 10}).test));
}

TEST(Splits, ExcludedTrialsAndShortSubjects) {
  auto m = manifest(1, 9);
  m.trials[0].excluded = true;
  const auto s = split_dataset(m, SplitSpec{2, 2, 1});
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 8u);
  EXPECT_FALSE(ids(s.train).count(m.trials[0].id));
  EXPECT_THROW(split_dataset(manifest(1, 7), SplitSpec{5, 2, 1}), DataError);
  auto dup = manifest(1, 10);
  dup.trials[1].id = dup.trials[0].id;
  EXPECT_THROW(split_dataset(dup, SplitSpec{1, 1, 1}), DataError);
}

TEST(Schedule, WarmupThenCosine) {
  TrainConfig c;
  c.max_lr = 1e-3;
  c.warmup_ratio = 0.05;
  const std::size_t total = 1000;
  EXPECT_DOUBLE_EQ(lr_at(0, total, c), 0.0);
  EXPECT_NEAR(lr_at(25, total, c), 5e-4, 1e-15);
  EXPECT_NEAR(lr_at(50, total, c), 1e-3, 1e-15);
  EXPECT_NEAR(lr_at(525, total, c), 5e-4, 1e-15);
  EXPECT_NEAR(lr_at(total, total, c), 0.0, 1e-15);
  EXPECT_THROW(lr_at(total + 1, total, c), ConfigError);
}

TEST(Schedule, ContinuousAndBounded) {
  TrainConfig c;
  c.max_lr = 2e-3;
  c.warmup_ratio = 0.1;
  const std::size_t total = 500;
  // Largest per-step change is the warm-up slope.
  const double slope = c.max_lr / (c.warmup_ratio * total);
  for (std::size_t s = 0; s < total; ++s) {
    const double a = lr_at(s, total, c), b = lr_at(s + 1, total, c);
    EXPECT_LE(std::abs(b - a), slope + 1e-15);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, c.max_lr);
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ad::Parameter<float> p("w", Tensor<float>::vector({1.0f, -2.0f, 0.5f}));
  p.grad = Tensor<float>::vector({0.3f, -4.0f, 0.0f});
  TrainConfig c;
  Adam adam({&p}, c);
  adam.step({&p}, 0.01);
  EXPECT_NEAR(p.value[0], 0.99f, 1e-6);
  EXPECT_NEAR(p.value[1], -1.99f, 1e-6);
  EXPECT_FLOAT_EQ(p.value[2], 0.5f);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
  auto c = toy_train(7);
  c.finetune_steps = 3;
  const nlohmann::json j = c;
  const auto back = j.get<TrainConfig>();
  EXPECT_EQ(back.max_steps, 7u);
  EXPECT_EQ(back.finetune_steps, 3u);
  EXPECT_DOUBLE_EQ(back.weights.gamma, 0.2);
  c.warmup_ratio = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Train, ZeroStepsReturnsInitialState) {
  Extractor<float> model(toy_model(), toy_selector(), 1);
  auto cfg = toy_train(0);
  cfg.epochs = 0;
  const auto before = Checkpoint::capture(model.parameters());
  const auto res = train(model, toy_examples(4, 1), toy_examples(2, 2), cfg);
  EXPECT_EQ(res.total_steps, 0u);
  EXPECT_TRUE(res.log.empty());
  EXPECT_EQ(res.best.tensors.size(), before.tensors.size());
  for (const auto& [name, t] : before.tensors) EXPECT_EQ(res.best.tensors.at(name).storage(), t.storage()) << name;
}

TEST(Train, LogIsMonotoneAndFinite) {
  const auto dir = scratch("log");
  Extractor<float> model(toy_model(), toy_selector(), 2);
  TrainHooks hooks;
  hooks.out_dir = dir;
  std::size_t seen = 0;
  hooks.on_log = [&](const LogRecord&) { ++seen; };
  const auto res = train(model, toy_examples(6, 3), toy_examples(2, 4), toy_train(12), hooks);
  ASSERT_EQ(res.log.size(), 12u);
  EXPECT_EQ(seen, 12u);
  for (std::size_t i = 0; i < res.log.size(); ++i) {
    EXPECT_EQ(res.log[i].step, i + 1);
    EXPECT_TRUE(std::isfinite(res.log[i].loss));
    EXPECT_TRUE(std::isfinite(res.log[i].lr));
    EXPECT_EQ(res.log[i].val_si_sdr.has_value(), (i + 1) % 5 == 0 || i + 1 == 12);
  }
  std::ifstream in(dir / "log.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(nlohmann::json::parse(line).at("step").get<std::size_t>(), ++lines);
  }
  EXPECT_EQ(lines, 12u);
  EXPECT_TRUE(fs::exists(dir / "best.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "last.ckpt"));
}

TEST(Train, ReproducibleForSeed) {
  const auto tr = toy_examples(6, 5), va = toy_examples(2, 6);
  auto cfg = toy_train(8);
  cfg.eeg_noise_floor = 0.1;
  Extractor<float> a(toy_model(), toy_selector(), 3), b(toy_model(), toy_selector(), 3);
  const auto ra = train(a, tr, va, cfg);
  const auto rb = train(b, tr, va, cfg);
  for (std::size_t i = 0; i < ra.log.size(); ++i) EXPECT_EQ(ra.log[i].loss, rb.log[i].loss);
  for (const auto& [name, t] : ra.last.tensors) EXPECT_EQ(rb.last.tensors.at(name).storage(), t.storage());
}

TEST(Train, ReloadedBestCheckpointReproducesValidationScore) {
  const auto dir = scratch("reload");
  const auto tr = toy_examples(6, 7), va = toy_examples(3, 8);
  Extractor<float> model(toy_model(), toy_selector(), 4);
  TrainHooks hooks;
  hooks.out_dir = dir;
  const auto res = train(model, tr, va, toy_train(15), hooks);
  ASSERT_TRUE(res.best_val_si_sdr.has_value());
  Extractor<float> fresh(toy_model(), toy_selector(), 99);
  load_checkpoint(dir / "best.ckpt").restore(fresh.parameters());
  EXPECT_NEAR(evaluate(fresh, va).mean(), *res.best_val_si_sdr, 1e-6);
}

TEST(Train, SelectorDelayHoldsGatesAndSkipsEarlyCheckpoints) {
  auto cfg = toy_train(10);
  cfg.selector_delay = 6;
  Extractor<float> model(toy_model(), toy_selector(), 5);
  const auto res = train(model, toy_examples(4, 9), toy_examples(2, 10), cfg);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(res.log[i].discretization, 0.0);
    EXPECT_EQ(res.log[i].cardinality, 0.0);
  }
  EXPECT_GT(res.log[7].cardinality, 0.0);
  EXPECT_GT(res.best_step, 6u);
}

TEST(Train, ImprovesOnToyTask) {
  auto cfg = toy_train(60);
  cfg.max_lr = 5e-3;
  cfg.eval_every = 60;
  Extractor<float> model(toy_model(), std::nullopt, 6);
  const auto tr = toy_examples(8, 11);
  const double before = evaluate(model, tr).mean();
  train(model, tr, {}, cfg);
  EXPECT_GT(evaluate(model, tr).mean(), before + 1.0);
}

TEST(Train, NonFiniteInputAborts) {
  const auto dir = scratch("nan");
  auto tr = toy_examples(2, 12);
  tr[0].mixture[10] = std::numeric_limits<float>::quiet_NaN();
  tr[1].mixture[10] = std::numeric_limits<float>::quiet_NaN();
  Extractor<float> model(toy_model(), toy_selector(), 7);
  TrainHooks hooks;
  hooks.out_dir = dir;
  EXPECT_THROW(train(model, tr, {}, toy_train(3), hooks), NumericalError);
  ASSERT_TRUE(fs::exists(dir / "nan_dump.json"));
  EXPECT_EQ(io::read_json(dir / "nan_dump.json").at("step").get<int>(), 1);
}

TEST(Train, FixedGateFineTuning) {
  Extractor<float> model(toy_model(), toy_selector(), 8);
  const std::vector<double> gate{1, 0, 0, 1};
  auto cfg = toy_train(4);
  cfg.selector_delay = 2;
  const auto sel_before = Checkpoint::capture(model.selector().parameters());
  const auto res = train(model, toy_examples(4, 13), toy_examples(2, 14), cfg, {}, &gate);
  for (const auto& r : res.log) EXPECT_EQ(r.cardinality, 0.0);
  EXPECT_TRUE(res.best_val_si_sdr.has_value());
  // The selector receives no gradient while the gate is fixed.
  const auto sel_after = Checkpoint::capture(model.selector().parameters());
  for (const auto& [name, t] : sel_before.tensors) EXPECT_EQ(sel_after.tensors.at(name).storage(), t.storage());
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  const auto dir = scratch("ckpt");
  Extractor<float> model(toy_model(), toy_selector(), 9);
  const auto c = Checkpoint::capture(model.parameters(), {{"gamma", 0.3}});
  save_checkpoint(dir / "m.ckpt", c);
  const auto back = load_checkpoint(dir / "m.ckpt");
  EXPECT_EQ(back.meta.at("gamma").get<double>(), 0.3);
  ASSERT_EQ(back.tensors.size(), c.tensors.size());
  for (const auto& [name, t] : c.tensors) EXPECT_EQ(back.tensors.at(name).storage(), t.storage());

  Extractor<float> no_selector(toy_model(), std::nullopt, 9);
  EXPECT_THROW(back.restore(no_selector.parameters()), DataError);
  std::ofstream(dir / "bad.ckpt") << "not a checkpoint";
  EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), DataError);
}

TEST(Sweep, SingleGammaGivesOneRow) {
  const auto cand = geometry::CandidateSet({0, 1, 2, 3}, geometry::synthetic_layout());
  SweepInputs in{toy_model(), toy_selector(), toy_train(6), cand, 0.5, 10};
  const auto rows = gamma_sweep({0.0}, in, toy_examples(4, 15), toy_examples(2, 16), toy_examples(2, 17));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_TRUE(rows[0].error.empty()) << rows[0].error;
  EXPECT_GE(rows[0].subset_size, 1u);
  for (auto idx : rows[0].subset) EXPECT_TRUE(cand.contains(idx));

  std::istringstream csv(sweep_csv(rows));
  std::string header, row, extra;
  std::getline(csv, header);
  std::getline(csv, row);
  EXPECT_FALSE(std::getline(csv, extra));
  EXPECT_EQ(header, "gamma,subset_size,si_sdr_soft,si_sdr_hard,si_sdr_unprocessed,best_val_si_sdr,subset,error");
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), 7);
  EXPECT_EQ(row.substr(0, 2), "0,");
  EXPECT_NE(sweep_summary(rows).find("gamma 0.00"), std::string::npos);
}

TEST(Sweep, FailingGammaLeavesErrorRow) {
  const auto cand = geometry::CandidateSet({0, 1, 2, 3}, geometry::synthetic_layout());
  SweepInputs in{toy_model(), toy_selector(), toy_train(2), cand, 0.5, 10};
  const auto rows = gamma_sweep({-1.0, 0.1}, in, toy_examples(2, 18), toy_examples(1, 19), {});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].error.empty());
  EXPECT_TRUE(rows[1].error.empty()) << rows[1].error;
}
