// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gcbase/dataio.hpp"
#include "gcbase/io.hpp"
#include "gcbase/objectives.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gcbase;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path root() {
  static const fs::path r = [] {
    auto p = fs::temp_directory_path() / "gcbase_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return r;
}

Run cli(const std::string& args) {
  static int n = 0;
  const auto o = root() / ("stdout" + std::to_string(n));
  const auto e = root() / ("stderr" + std::to_string(n++));
  const std::string cmd = std::string(GCBASE_CLI) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(o);
  r.err = slurp(e);
  return r;
}

// Small enough that a few training steps take well under a second.
json quick_config() {
  return {{"seed", 3},
          {"data",
           {{"synthetic",
             {{"spec",
               {{"n_channels", 24},
                {"informative", {13, 16}},
                {"duration_s", 3.0},
                {"audio_rate_hz", 2000.0},
                {"eeg_rate_hz", 64.0},
                {"target_band_hz", {100.0, 800.0}},
                {"interferer_band_hz", {100.0, 800.0}}}},
              {"subjects", 1},
              {"trials_per_subject", 4}}}}},
          {"preprocess", {{"band_hz", {0.5, 20.0}}, {"eeg_rate_hz", 64.0}, {"audio_rate_hz", 2000.0}}},
          {"segment_s", 1.0},
          {"model", {{"profile", "tiny"}, {"n_blocks", 2}}},
          {"selector", {{"enabled", true}, {"channels", 8}, {"hidden", 16}, {"n_blocks", 1}}},
          {"train", {{"max_lr", 0.003}, {"batch_size", 2}, {"max_steps", 4}, {"eval_every", 2}}},
          {"loss", {{"gamma", 0.2}}},
          {"split", {{"n_test", 1}, {"n_val", 1}}},
          {"gammas", {0.0, 0.3, 0.6}}};
}

fs::path write_config(const std::string& name, const json& j) {
  const auto p = root() / (name + ".json");
  std::ofstream(p) << j.dump(2);
  return p;
}

std::string arg(const fs::path& p) { return p.string(); }

// Trains once and shares the run directory between tests.
const fs::path& trained() {
  static const fs::path dir = [] {
    const auto d = root() / "train";
    const auto r = cli("train --config " + arg(write_config("quick", quick_config())) + " --out " + arg(d));
    EXPECT_EQ(r.code, 0) << r.err;
    return d;
  }();
  return dir;
}

void expect_error_record(const Run& r, int code) {
  EXPECT_EQ(r.code, code) << r.err;
  const auto j = json::parse(r.err.substr(r.err.find('{')));
  EXPECT_EQ(j.at("error").at("exit_code").get<int>(), code);
  EXPECT_FALSE(j.at("error").at("message").get<std::string>().empty());
  EXPECT_FALSE(j.at("error").at("kind").get<std::string>().empty());
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);)
    if (!l.empty()) out.push_back(l);
  return out;
}

}  // namespace

TEST(Synth, WritesManifestWithAllTrials) {
  const auto out = root() / "synth_a";
  const auto r = cli("synth --config " + arg(write_config("quick", quick_config())) + " --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = io::read_manifest(out / "manifest.json");
  EXPECT_EQ(m.trials.size(), 4u);
  for (const auto& t : m.trials) EXPECT_TRUE(fs::exists(out / t.dir / "eeg.bin")) << t.dir;
  EXPECT_TRUE(fs::exists(out / "layout.csv"));
  EXPECT_TRUE(fs::exists(out / "config.json"));
}

TEST(Synth, SameSeedIsByteIdentical) {
  const auto cfg = arg(write_config("quick", quick_config()));
  const auto a = root() / "synth_same_a", b = root() / "synth_same_b", c = root() / "synth_other";
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 5 --out " + arg(a)).code, 0);
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 5 --out " + arg(b)).code, 0);
  ASSERT_EQ(cli("synth --config " + cfg + " --seed 6 --out " + arg(c)).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    if (rel == "config.json") continue;  // holds absolute paths
    ++files;
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  EXPECT_GT(files, 10u);
  const auto m = io::read_manifest(a / "manifest.json");
  EXPECT_NE(slurp(a / m.trials[0].dir / "mixture.wav"), slurp(c / m.trials[0].dir / "mixture.wav"));
}

TEST(Synth, MixturesAtConfiguredSnr) {
  const auto out = root() / "synth_a";
  if (!fs::exists(out / "manifest.json")) {
    ASSERT_EQ(cli("synth --config " + arg(write_config("quick", quick_config())) + " --out " + arg(out)).code, 0);
  }
  const auto m = io::read_manifest(out / "manifest.json");
  for (const auto& t : m.trials) {
    const auto trial = io::read_trial(out / t.dir, t);
    EXPECT_NEAR(dataio::snr_db(trial.target.samples, trial.interferer.samples), 0.0, 1e-5) << t.id;
    for (std::size_t i = 0; i < trial.mixture.size(); ++i)
      ASSERT_NEAR(trial.mixture.samples[i], trial.target.samples[i] + trial.interferer.samples[i], 1e-6);
  }
}

TEST(Train, WritesRunArtifacts) {
  const auto& dir = trained();
  for (const char* f : {"config.json", "log.jsonl", "best.ckpt", "last.ckpt", "summary.json", "subset.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(lines(slurp(dir / "log.jsonl")).size(), 4u);
  const auto summary = io::read_json(dir / "summary.json");
  EXPECT_EQ(summary.at("total_steps").get<int>(), 4);
}

TEST(Eval, IdenticalEstimateScoresCeiling) {
  const auto dir = root() / "eval_identity";
  fs::create_directories(dir);
  Rng rng(1);
  dataio::Waveform w{std::vector<double>(4000), 8000.0};
  for (auto& v : w.samples) v = 0.2 * rng.normal();
  io::write_wav(dir / "ref.wav", w);
  const auto stored = io::read_wav(dir / "ref.wav");
  const auto r = cli("eval --estimate " + arg(dir / "ref.wav") + " --reference " + arg(dir / "ref.wav") + " --out " +
                     arg(dir / "out"));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(dir / "out" / "metrics.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], "id,SI-SDR");
  const double score = std::stod(rows[1].substr(rows[1].find(',') + 1));
  EXPECT_NEAR(score, objectives::si_sdr_ceiling(stored.samples), 1e-6);
}

TEST(Eval, CheckpointOnTestSplit) {
  const auto& dir = trained();
  const auto out = root() / "eval_ckpt";
  const auto r = cli("eval --checkpoint " + arg(dir / "best.ckpt") + " --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "metrics.csv"));
  ASSERT_GE(rows.size(), 3u);
  EXPECT_NE(rows[0].find("SI-SDR"), std::string::npos);
  EXPECT_NE(rows[0].find("SI-SDR (mixture)"), std::string::npos);
  EXPECT_EQ(rows.back().substr(0, 5), "mean,");

  const auto sub = cli("eval --checkpoint " + arg(dir / "best.ckpt") + " --subset " + arg(dir / "subset.json") +
                       " --split val --out " + arg(root() / "eval_subset"));
  EXPECT_EQ(sub.code, 0) << sub.err;
}

TEST(Select, SubsetInsideCandidates) {
  const auto& dir = trained();
  const auto out = root() / "select";
  const auto r = cli("select --checkpoint " + arg(dir / "best.ckpt") + " --threshold 0.5 --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::read_json(out / "subset.json");
  std::set<std::size_t> cand;
  for (const auto& c : j.at("candidates")) cand.insert(c.at("index").get<std::size_t>());
  EXPECT_EQ(cand.size(), 12u);
  const auto subset = j.at("subset_indices").get<std::vector<std::size_t>>();
  EXPECT_FALSE(subset.empty());
  for (auto i : subset) EXPECT_TRUE(cand.count(i)) << i;
  EXPECT_TRUE(fs::exists(out / "topomap.svg"));
  EXPECT_EQ(cli("select --checkpoint " + arg(dir / "best.ckpt") + " --threshold 1.5 --out " + arg(out)).code, 2);
}

TEST(Sweep, ThreeGammasGiveThreeRows) {
  auto cfg = quick_config();
  cfg["train"]["max_steps"] = 2;
  const auto out = root() / "sweep";
  const auto r = cli("sweep --config " + arg(write_config("sweep", cfg)) + " --gammas 0,0.3,0.6 --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(out / "sweep.csv"));
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[1].substr(0, 2), "0,");
  EXPECT_EQ(rows[2].substr(0, 4), "0.3,");
  EXPECT_EQ(rows[3].substr(0, 4), "0.6,");
  EXPECT_EQ(lines(slurp(out / "summary.txt")).size(), 3u);
}

TEST(Gradcheck, ReportsEveryComponent) {
  const auto out = root() / "gradcheck";
  const auto r = cli("gradcheck --component discretization_loss,cardinality_loss,si_sdr --seed 2 --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = io::read_json(out / "gradcheck.json").at("reports");
  ASSERT_EQ(j.size(), 3u);
  for (const auto& rep : j) EXPECT_TRUE(rep.at("passed").get<bool>());
  expect_error_record(cli("gradcheck --component nope --out " + arg(out)), 2);
}

TEST(Topomap, FromLabels) {
  const auto out = root() / "topomap";
  const auto r = cli("topomap --layout " + arg(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/synth24.csv") +
                     " --selected L1,R2 --out " + arg(out));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "topomap.svg"));
  EXPECT_TRUE(fs::exists(out / "topomap.selected.json"));
}

TEST(Errors, ExitCodesAndJsonRecords) {
  const auto out = root() / "errors";
  expect_error_record(cli("train --out " + arg(out)), 2);
  expect_error_record(cli("train --config /nonexistent.json --out " + arg(out)), 2);
  auto bad = quick_config();
  bad["bogus_key"] = 1;
  expect_error_record(cli("train --config " + arg(write_config("bad", bad)) + " --out " + arg(out)), 2);
  std::ofstream(root() / "garbage.ckpt") << "garbage";
  expect_error_record(cli("select --checkpoint " + arg(root() / "garbage.ckpt") + " --out " + arg(out)), 3);
  auto empty_region = quick_config();
  empty_region["region"] = {{"kind", "disc-union"}, {"discs", {{{"center", {0.0, 5.0}}, {"radius", 0.1}}}}};
  expect_error_record(cli("train --config " + arg(write_config("empty", empty_region)) + " --out " + arg(out)), 3);
  EXPECT_EQ(cli("frobnicate").code, 2);
}

TEST(Outputs, StayUnderOutDirectory) {
  const auto out = root() / "contained";
  const auto cfg = arg(write_config("quick", quick_config()));
  const auto before = std::distance(fs::directory_iterator(root()), fs::directory_iterator{});
  const auto r = cli("synth --config " + cfg + " --out " + arg(out));
  ASSERT_EQ(r.code, 0);
  // Only the stdout/stderr captures of this call and the output directory are new.
  const auto after = std::distance(fs::directory_iterator(root()), fs::directory_iterator{});
  EXPECT_EQ(after - before, 3);
  EXPECT_FALSE(fs::exists(fs::current_path() / "manifest.json"));
}
