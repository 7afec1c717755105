// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "gcbase/geometry.hpp"
#include "gcbase/io.hpp"

namespace fs = std::filesystem;
using namespace gcbase;
using namespace gcbase::geometry;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("gcbase_geometry_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ElectrodeLayout parse(const std::string& text) {
  std::istringstream in(text);
  return parse_layout(in, "test");
}

ElectrodeLayout cross() { return parse("N,0,1\nS,0,-1\nW,-1,0\nE,1,0\n"); }

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Layout, ParsesFourRows) {
  const auto l = parse("# comment\nA,0,0\nB,0.5,0\n\nC,0,0.5  # trailing\nD,-0.5,-0.5\n");
  EXPECT_EQ(l.size(), 4u);
  EXPECT_EQ(l.names(), (std::vector<std::string>{"A", "B", "C", "D"}));
  EXPECT_DOUBLE_EQ(l.coords()[3].x, -0.5);
  EXPECT_FALSE(l.mastoid_indices().has_value());
}

TEST(Layout, DuplicateNameIsRejected) {
  try {
    parse("Cz,0,0\nFz,0,0.3\nCz,0.1,0\n");
    FAIL() << "expected a duplicate-name error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("Cz"), std::string::npos);
  }
}

TEST(Layout, ParseErrorCarriesLineNumber) {
  try {
    parse("A,0,0\nB,zero,0\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("A,0\n"), ParseError);
  EXPECT_THROW(parse("A,0,0,bogus\n"), ParseError);
  EXPECT_THROW(parse("# nothing\n"), ParseError);
}

TEST(Layout, OutOfRangeCoordinateIsRejected) {
  EXPECT_THROW(parse("A,1.5,0\n"), DataError);
  EXPECT_NO_THROW(parse("A,1.2,0\n"));
}

TEST(Layout, MastoidFlags) {
  const auto l = parse("A,0,0\nM1,-0.7,-0.7,mastoid\nB,0.2,0\nM2,0.7,-0.7,mastoid\n");
  ASSERT_TRUE(l.mastoid_indices().has_value());
  EXPECT_EQ(l.mastoid_indices()->first, 1u);
  EXPECT_EQ(l.mastoid_indices()->second, 3u);
  EXPECT_THROW(parse("A,0,0,mastoid\nB,0.1,0\n"), DataError);
}

TEST(Layout, ShippedDefaultHas128Channels) {
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  EXPECT_EQ(l.size(), 128u);
}

TEST(Layout, SyntheticFileMatchesBuiltIn) {
  const auto file = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/synth24.csv");
  const auto builtin = synthetic_layout();
  EXPECT_EQ(file.id(), builtin.id());
  EXPECT_EQ(file.names(), builtin.names());
}

TEST(Layout, SaveLoadRoundTripKeepsId) {
  const auto dir = scratch("roundtrip");
  const auto l = parse("A,0.123456789,0.1\nM1,-0.7,-0.7,mastoid\nM2,0.7,-0.7,mastoid\n");
  save_layout(l, dir / "l.csv");
  const auto back = load_layout(dir / "l.csv");
  EXPECT_EQ(back.id(), l.id());
  EXPECT_EQ(back.mastoid_indices(), l.mastoid_indices());
}

TEST(Layout, MissingFileIsDataError) { EXPECT_THROW(load_layout("/nonexistent/layout.csv"), DataError); }

TEST(HardSelect, LargeDiscAdmitsEverything) {
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  RegionSpec r;
  r.discs = {{{0.0, 0.0}, 10.0}};
  EXPECT_EQ(hard_select(l, r).size(), l.size());
}

TEST(HardSelect, EarDiscsPickEarElectrodes) {
  const auto l = cross();
  RegionSpec r;
  r.discs = {{{-1.0, 0.0}, 0.5}, {{1.0, 0.0}, 0.5}};
  const auto s = hard_select(l, r);
  EXPECT_EQ(s.indices(), (std::vector<std::size_t>{2, 3}));
  EXPECT_EQ(s.labels(l), (std::vector<std::string>{"W", "E"}));
}

TEST(HardSelect, BoundaryIsIncluded) {
  const auto l = parse("A,0.5,0\nB,0.6,0\n");
  RegionSpec r;
  r.discs = {{{0.0, 0.0}, 0.5}};
  EXPECT_EQ(hard_select(l, r).indices(), (std::vector<std::size_t>{0}));
}

TEST(HardSelect, EmptyResultIsAnError) {
  const auto l = cross();
  RegionSpec r;
  r.discs = {{{0.0, 0.0}, 0.1}};
  EXPECT_THROW(hard_select(l, r), DataError);
}

TEST(HardSelect, ExplicitListOfThirty) {
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  const auto r = io::read_json(fs::path(GCBASE_SOURCE_DIR) / "data/regions/headphone30.json").get<RegionSpec>();
  const auto s = hard_select(l, r);
  EXPECT_EQ(s.size(), 30u);
  EXPECT_THROW(hard_select(l, RegionSpec::explicit_list({"A1", "nope"})), ConfigError);
}

TEST(HardSelect, SyntheticLayoutHeadphoneRegion) {
  const auto l = synthetic_layout();
  const auto s = hard_select(l, RegionSpec::headphone());
  std::vector<std::size_t> ears(12);
  std::iota(ears.begin(), ears.end(), 12);
  EXPECT_EQ(s.indices(), ears);
}

TEST(HardSelect, Idempotent) {
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  const auto r = RegionSpec::headphone(0.4);
  const auto a = hard_select(l, r);
  // Restricting the layout to the selection and selecting again changes nothing.
  std::vector<std::string> names;
  std::vector<Point> pts;
  for (auto i : a.indices()) {
    names.push_back(l.names()[i]);
    pts.push_back(l.coords()[i]);
  }
  const ElectrodeLayout sub(names, pts);
  EXPECT_EQ(hard_select(sub, r).size(), a.size());
  EXPECT_EQ(hard_select(l, r), a);
}

TEST(HardSelect, MonotoneInRadius) {
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  std::size_t prev = 0;
  for (double radius = 0.2; radius <= 1.0; radius += 0.05) {
    const auto s = hard_select(l, RegionSpec::headphone(radius));
    EXPECT_GE(s.size(), prev);
    if (prev > 0) {
      const auto smaller = hard_select(l, RegionSpec::headphone(radius - 0.05));
      EXPECT_TRUE(smaller.is_subset_of(s));
    }
    prev = s.size();
  }
}

TEST(Region, JsonRoundTripAndValidation) {
  const auto r = RegionSpec::headphone(0.3);
  const nlohmann::json j = r;
  const auto back = j.get<RegionSpec>();
  ASSERT_EQ(back.discs.size(), 2u);
  EXPECT_DOUBLE_EQ(back.discs[1].radius, 0.3);
  EXPECT_THROW(nlohmann::json({{"kind", "blob"}}).get<RegionSpec>(), ConfigError);
  EXPECT_THROW(RegionSpec::headphone(-1.0).validate(), ConfigError);
  EXPECT_THROW(RegionSpec::explicit_list({}).validate(), ConfigError);
}

TEST(CandidateSet, Invariants) {
  const auto l = cross();
  EXPECT_THROW(CandidateSet({}, l), InvariantError);
  EXPECT_THROW(CandidateSet({4}, l), InvariantError);
  EXPECT_THROW(CandidateSet({2, 1}, l), InvariantError);
  const CandidateSet s({0, 2}, l);
  EXPECT_TRUE(s.contains(2));
  EXPECT_FALSE(s.contains(1));
}

TEST(Topomap, AllSelected) {
  const auto dir = scratch("all");
  const auto l = cross();
  const CandidateSet all({0, 1, 2, 3}, l);
  emit_topomap(l, all, all, dir / "map.svg");
  std::ifstream in(dir / "map.svg");
  const std::string svg((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(count(svg, "class=\"electrode selected\""), 4u);
  EXPECT_EQ(count(svg, "class=\"electrode candidate\""), 0u);
  EXPECT_NE(svg.find("class=\"head\""), std::string::npos);
}

TEST(Topomap, EmptySelectionIsInvariantError) {
  const auto l = cross();
  EXPECT_THROW(CandidateSet({}, l), InvariantError);
}

TEST(Topomap, NonSubsetIsInvariantError) {
  const auto dir = scratch("nonsubset");
  const auto l = cross();
  EXPECT_THROW(emit_topomap(l, CandidateSet({0}, l), CandidateSet({1, 2}, l), dir / "m.svg"), InvariantError);
}

TEST(Topomap, ThirtyCandidatesEighteenSelected) {
  const auto dir = scratch("thirty");
  const auto l = load_layout(fs::path(GCBASE_SOURCE_DIR) / "data/layouts/radial128.csv");
  const auto cand =
      hard_select(l, io::read_json(fs::path(GCBASE_SOURCE_DIR) / "data/regions/headphone30.json").get<RegionSpec>());
  std::vector<std::size_t> picked(cand.indices().begin(), cand.indices().begin() + 18);
  const CandidateSet sel(picked, l);
  emit_topomap(l, sel, cand, dir / "map.svg");

  std::ifstream in(dir / "map.svg");
  const std::string svg((std::istreambuf_iterator<char>(in)), {});
  EXPECT_EQ(count(svg, "class=\"electrode selected\""), 18u);
  EXPECT_EQ(count(svg, "class=\"electrode candidate\""), 12u);
  EXPECT_EQ(count(svg, "class=\"electrode\""), 128u - 30u);

  const auto side = io::read_json(topomap_sidecar_path(dir / "map.svg"));
  EXPECT_EQ(side.at("selected").size(), 18u);
  EXPECT_EQ(side.at("candidate").size(), 30u);
  EXPECT_EQ(side.at("selected").get<std::vector<std::string>>(), sel.labels(l));
}

TEST(Topomap, UnwritablePath) {
  const auto l = cross();
  const CandidateSet all({0, 1, 2, 3}, l);
  EXPECT_THROW(emit_topomap(l, all, all, "/nonexistent/dir/map.svg"), DataError);
}
