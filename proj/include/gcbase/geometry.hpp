// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Electrode layouts, the headphone-shaped admissible region, and hard
// (geometric) channel pre-selection.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/errors.hpp"

namespace gcbase::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

inline double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Coordinates are scalp projections with the head circle at radius 1.
inline constexpr double kMaxRadius = 1.2;

class ElectrodeLayout {
 public:
  ElectrodeLayout() = default;
  ElectrodeLayout(std::vector<std::string> names, std::vector<Point> coords,
                  std::optional<std::pair<std::size_t, std::size_t>> mastoids = std::nullopt)
      : names_(std::move(names)), coords_(std::move(coords)), mastoids_(mastoids) {
    validate();
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<Point>& coords() const noexcept { return coords_; }
  const std::optional<std::pair<std::size_t, std::size_t>>& mastoid_indices() const noexcept { return mastoids_; }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = std::find(names_.begin(), names_.end(), label);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  /// Content fingerprint (FNV-1a over labels and coordinates).
  std::string id() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](const void* p, std::size_t n) {
      const auto* b = static_cast<const unsigned char*>(p);
      for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ULL;
    };
    for (std::size_t i = 0; i < names_.size(); ++i) {
      mix(names_[i].data(), names_[i].size());
      mix(&coords_[i].x, sizeof(double));
      mix(&coords_[i].y, sizeof(double));
    }
    std::ostringstream os;
    os << "layout-" << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
  }

 private:
  void validate() const {
    if (names_.size() != coords_.size()) throw InvariantError("layout: names and coordinates differ in length");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw InvariantError("layout: empty electrode label at index " + std::to_string(i));
      if (!seen.insert(names_[i]).second) throw DataError("layout: duplicate electrode name '" + names_[i] + "'");
      const Point p = coords_[i];
      if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::hypot(p.x, p.y) > kMaxRadius)
        throw DataError("layout: electrode '" + names_[i] + "' lies outside the radius-1.2 disc");
    }
    if (mastoids_) {
      const auto [a, b] = *mastoids_;
      if (a >= names_.size() || b >= names_.size() || a == b) throw InvariantError("layout: invalid mastoid indices");
    }
  }

  std::vector<std::string> names_;
  std::vector<Point> coords_;
  std::optional<std::pair<std::size_t, std::size_t>> mastoids_;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_number(const std::string& s, const std::string& source, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ParseError(source, line, "expected a number, got '" + s + "'");
  }
}

}  // namespace detail

/// Parses the `label,x,y[,mastoid]` text format. `source` names the input in
/// error messages.
inline ElectrodeLayout parse_layout(std::istream& in, const std::string& source = "<layout>") {
  std::vector<std::string> names;
  std::vector<Point> coords;
  std::vector<std::size_t> mastoids;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string text = detail::trim(raw);
    if (text.empty()) continue;
    const auto f = detail::split(text, ',');
    if (f.size() < 3 || f.size() > 4)
      throw ParseError(source, line, "expected 'label,x,y[,mastoid]', got " + std::to_string(f.size()) + " fields");
    if (f[0].empty()) throw ParseError(source, line, "empty electrode label");
    if (auto [it, inserted] = first_line.emplace(f[0], line); !inserted)
      throw DataError(source + ":" + std::to_string(line) + ": duplicate electrode name '" + f[0] +
                      "' (first defined on line " + std::to_string(it->second) + ")");
    const Point p{detail::parse_number(f[1], source, line), detail::parse_number(f[2], source, line)};
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || std::hypot(p.x, p.y) > kMaxRadius)
      throw DataError(source + ":" + std::to_string(line) + ": electrode '" + f[0] +
                      "' lies outside the radius-1.2 disc");
    if (f.size() == 4) {
      std::string flag = f[3];
      std::transform(flag.begin(), flag.end(), flag.begin(), [](unsigned char c) { return std::tolower(c); });
      if (flag == "mastoid" || flag == "1" || flag == "true")
        mastoids.push_back(names.size());
      else if (!(flag.empty() || flag == "0" || flag == "false"))
        throw ParseError(source, line, "unknown fourth field '" + f[3] + "'");
    }
    names.push_back(f[0]);
    coords.push_back(p);
  }
  if (names.empty()) throw ParseError(source, line, "layout contains no electrodes");
  std::optional<std::pair<std::size_t, std::size_t>> m;
  if (!mastoids.empty()) {
    if (mastoids.size() != 2)
      throw DataError(source + ": expected exactly two mastoid electrodes, found " + std::to_string(mastoids.size()));
    m = std::make_pair(mastoids[0], mastoids[1]);
  }
  return ElectrodeLayout(std::move(names), std::move(coords), m);
}

inline ElectrodeLayout load_layout(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open layout file " + path.string());
  return parse_layout(in, path.string());
}

inline void save_layout(const ElectrodeLayout& layout, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write layout file " + path.string());
  out << "# label,x,y[,mastoid]\n" << std::setprecision(17);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    out << layout.names()[i] << ',' << layout.coords()[i].x << ',' << layout.coords()[i].y;
    const auto& m = layout.mastoid_indices();
    if (m && (m->first == i || m->second == i)) out << ",mastoid";
    out << '\n';
  }
}

/// 24-electrode layout for the synthetic task: twelve central electrodes
/// (C1-C12) away from the ears and six around each ear (L1-L6, R1-R6), so the
/// default headphone region admits exactly the twelve ear electrodes.
inline ElectrodeLayout synthetic_layout() {
  std::vector<std::string> names;
  std::vector<Point> coords;
  for (int k = 0; k < 4; ++k) {
    const double a = std::numbers::pi / 2.0 * k + std::numbers::pi / 4.0;
    names.push_back("C" + std::to_string(k + 1));
    coords.push_back({0.3 * std::cos(a), 0.3 * std::sin(a)});
  }
  for (int k = 0; k < 8; ++k) {
    const double a = std::numbers::pi / 4.0 * k;
    names.push_back("C" + std::to_string(k + 5));
    coords.push_back({0.6 * std::cos(a), 0.6 * std::sin(a)});
  }
  const Point ear[6] = {{0.05, 0.2}, {0.05, -0.2}, {0.2, 0.1}, {0.2, -0.1}, {-0.1, 0.1}, {-0.1, -0.1}};
  for (const char side : {'L', 'R'}) {
    const double sx = side == 'L' ? -1.0 : 1.0;
    for (int k = 0; k < 6; ++k) {
      names.push_back(std::string(1, side) + std::to_string(k + 1));
      // offsets point inward for positive x-offsets
      coords.push_back({sx * (1.0 - ear[k].x), ear[k].y});
    }
  }
  return ElectrodeLayout(std::move(names), std::move(coords));
}

// --------------------------------------------------------------------- region

struct Disc {
  Point center;
  double radius = 0.0;
};

struct RegionSpec {
  enum class Kind { DiscUnion, ExplicitList };
  Kind kind = Kind::DiscUnion;
  std::vector<Disc> discs;
  std::vector<std::string> labels;

  /// Two discs over the ears: the default headphone-shaped region.
  static RegionSpec headphone(double radius = 0.35) {
    RegionSpec r;
    r.discs = {{{-1.0, 0.0}, radius}, {{1.0, 0.0}, radius}};
    return r;
  }
  static RegionSpec explicit_list(std::vector<std::string> labels) {
    RegionSpec r;
    r.kind = Kind::ExplicitList;
    r.labels = std::move(labels);
    return r;
  }

  void validate() const {
    if (kind == Kind::DiscUnion) {
      if (discs.empty()) throw ConfigError("region: disc-union needs at least one disc");
      for (const auto& d : discs)
        if (!(d.radius > 0.0) || !std::isfinite(d.radius)) throw ConfigError("region: disc radius must be positive");
    } else if (labels.empty()) {
      throw ConfigError("region: explicit-list needs at least one label");
    }
  }
};

inline void to_json(nlohmann::json& j, const RegionSpec& r) {
  if (r.kind == RegionSpec::Kind::ExplicitList) {
    j = {{"kind", "explicit-list"}, {"labels", r.labels}};
    return;
  }
  nlohmann::json discs = nlohmann::json::array();
  for (const auto& d : r.discs) discs.push_back({{"center", {d.center.x, d.center.y}}, {"radius", d.radius}});
  j = {{"kind", "disc-union"}, {"discs", discs}};
}

inline void from_json(const nlohmann::json& j, RegionSpec& r) {
  const std::string kind = j.value("kind", std::string("disc-union"));
  r = RegionSpec{};
  if (kind == "explicit-list") {
    r.kind = RegionSpec::Kind::ExplicitList;
    r.labels = j.at("labels").get<std::vector<std::string>>();
  } else if (kind == "disc-union") {
    for (const auto& d : j.at("discs")) {
      const auto c = d.at("center").get<std::array<double, 2>>();
      r.discs.push_back({{c[0], c[1]}, d.at("radius").get<double>()});
    }
  } else {
    throw ConfigError("region: unknown kind '" + kind + "'");
  }
  r.validate();
}

/// Ordered subset of layout indices admitted by the geometry constraint.
class CandidateSet {
 public:
  CandidateSet() = default;
  CandidateSet(std::vector<std::size_t> indices, const ElectrodeLayout& layout)
      : indices_(std::move(indices)), layout_id_(layout.id()) {
    if (indices_.empty()) throw InvariantError("candidate set must not be empty");
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      if (indices_[i] >= layout.size())
        throw InvariantError("candidate index " + std::to_string(indices_[i]) + " outside layout of size " +
                             std::to_string(layout.size()));
      if (i > 0 && indices_[i] <= indices_[i - 1]) throw InvariantError("candidate indices must be strictly increasing");
    }
  }

  const std::vector<std::size_t>& indices() const noexcept { return indices_; }
  std::size_t size() const noexcept { return indices_.size(); }
  const std::string& source_layout_id() const noexcept { return layout_id_; }
  bool contains(std::size_t layout_index) const {
    return std::binary_search(indices_.begin(), indices_.end(), layout_index);
  }
  bool is_subset_of(const CandidateSet& other) const {
    return std::all_of(indices_.begin(), indices_.end(), [&](std::size_t i) { return other.contains(i); });
  }
  std::vector<std::string> labels(const ElectrodeLayout& layout) const {
    std::vector<std::string> out;
    for (auto i : indices_) out.push_back(layout.names().at(i));
    return out;
  }

  friend bool operator==(const CandidateSet& a, const CandidateSet& b) {
    return a.indices_ == b.indices_ && a.layout_id_ == b.layout_id_;
  }

 private:
  std::vector<std::size_t> indices_;
  std::string layout_id_;
};

/// Geometric pre-selection. Points on a disc boundary are inside.
inline CandidateSet hard_select(const ElectrodeLayout& layout, const RegionSpec& region) {
  region.validate();
  std::vector<std::size_t> picked;
  if (region.kind == RegionSpec::Kind::DiscUnion) {
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const Point p = layout.coords()[i];
      const bool inside = std::any_of(region.discs.begin(), region.discs.end(),
                                      [&](const Disc& d) { return distance(p, d.center) <= d.radius; });
      if (inside) picked.push_back(i);
    }
  } else {
    for (const auto& label : region.labels) {
      const auto idx = layout.find(label);
      if (!idx) throw ConfigError("region: label '" + label + "' not present in the layout");
      picked.push_back(*idx);
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());
  }
  if (picked.empty()) throw DataError("hard selection: no electrode lies inside the region");
  return CandidateSet(std::move(picked), layout);
}

inline CandidateSet candidate_from_labels(const ElectrodeLayout& layout, const std::vector<std::string>& labels) {
  return hard_select(layout, RegionSpec::explicit_list(labels));
}

// -------------------------------------------------------------------- topomap

/// Sidecar path written next to a topomap: `<stem>.selected.json`.
inline std::filesystem::path topomap_sidecar_path(const std::filesystem::path& svg) {
  auto p = svg;
  p.replace_extension(".selected.json");
  return p;
}

/// Writes an SVG scalp map: head outline, every electrode as a small dot,
/// candidates outlined, selected electrodes filled. A JSON sidecar lists the
/// selected labels.
inline void emit_topomap(const ElectrodeLayout& layout, const CandidateSet& selected, const CandidateSet& candidate,
                         const std::filesystem::path& path) {
  if (selected.source_layout_id() != layout.id() || candidate.source_layout_id() != layout.id())
    throw InvariantError("topomap: candidate or selection refers to a different layout");
  if (!selected.is_subset_of(candidate)) throw InvariantError("topomap: selected set is not a subset of the candidate set");

  constexpr double kScale = 200.0;
  constexpr double kCentre = 260.0;
  auto px = [&](Point p) { return std::make_pair(kCentre + kScale * p.x, kCentre - kScale * p.y); };

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"520\" height=\"520\" viewBox=\"0 0 520 520\">\n"
      << "  <circle class=\"head\" cx=\"" << kCentre << "\" cy=\"" << kCentre << "\" r=\"" << kScale
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "  <path class=\"nose\" d=\"M " << kCentre - 18 << ' ' << kCentre - kScale + 2 << " L " << kCentre << ' '
      << kCentre - kScale - 22 << " L " << kCentre + 18 << ' ' << kCentre - kScale + 2
      << "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto [x, y] = px(layout.coords()[i]);
    std::string cls = "electrode";
    std::string style = "fill=\"#bbbbbb\" stroke=\"none\" r=\"3\"";
    if (selected.contains(i)) {
      cls = "electrode selected";
      style = "fill=\"#1f5fd6\" stroke=\"#1f5fd6\" stroke-width=\"1.5\" r=\"6\"";
    } else if (candidate.contains(i)) {
      cls = "electrode candidate";
      style = "fill=\"none\" stroke=\"#1f5fd6\" stroke-width=\"1.5\" r=\"6\"";
    }
    svg << "  <circle class=\"" << cls << "\" data-label=\"" << layout.names()[i] << "\" cx=\"" << x << "\" cy=\"" << y
        << "\" " << style << "/>\n";
  }
  svg << "</svg>\n";

  std::ofstream out(path);
  if (!out) throw DataError("cannot write topomap " + path.string());
  out << svg.str();
  if (!out) throw DataError("failed writing topomap " + path.string());

  nlohmann::json side = {{"layout_id", layout.id()},
                         {"candidate", candidate.labels(layout)},
                         {"selected", selected.labels(layout)}};
  std::ofstream sc(topomap_sidecar_path(path));
  if (!sc) throw DataError("cannot write topomap sidecar for " + path.string());
  sc << side.dump(2) << '\n';
}

}  // namespace gcbase::geometry
