// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// On-disk formats: WAV audio, the EEG matrix file, and the dataset manifest.
//
// EEG file: an ASCII header line `channels,time,rate\n` followed by
// channels*time little-endian float32 values in row-major order.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/dataio.hpp"
#include "gcbase/errors.hpp"

namespace gcbase::io {

namespace fs = std::filesystem;
using dataio::EEGTrial;
using dataio::PairedTrial;
using dataio::Waveform;

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

template <typename U>
U get(std::istream& is, const std::string& what) {
  U v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(U))) throw DataError(what + ": truncated file");
  return v;
}

inline std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(p, std::ios::binary);
  if (!os) throw DataError("cannot write " + p.string());
  return os;
}

inline std::ifstream open_in(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  if (!is) throw DataError("cannot open " + p.string());
  return is;
}

}  // namespace detail

// ----------------------------------------------------------------------- WAV

enum class WavFormat { kPcm16, kFloat32 };

inline void write_wav(const fs::path& path, const Waveform& w, WavFormat fmt = WavFormat::kFloat32) {
  auto os = detail::open_out(path);
  const std::uint16_t bits = fmt == WavFormat::kPcm16 ? 16 : 32;
  const std::uint16_t tag = fmt == WavFormat::kPcm16 ? 1 : 3;
  const auto rate = static_cast<std::uint32_t>(std::lround(w.rate_hz));
  const auto data_bytes = static_cast<std::uint32_t>(w.size() * bits / 8);
  os.write("RIFF", 4);
  detail::put<std::uint32_t>(os, 36 + data_bytes);
  os.write("WAVEfmt ", 8);
  detail::put<std::uint32_t>(os, 16);
  detail::put<std::uint16_t>(os, tag);
  detail::put<std::uint16_t>(os, 1);
  detail::put<std::uint32_t>(os, rate);
  detail::put<std::uint32_t>(os, rate * bits / 8);
  detail::put<std::uint16_t>(os, bits / 8);
  detail::put<std::uint16_t>(os, bits);
  os.write("data", 4);
  detail::put<std::uint32_t>(os, data_bytes);
  for (double v : w.samples) {
    if (fmt == WavFormat::kPcm16) {
      const double c = std::clamp(v, -1.0, 1.0) * 32767.0;
      detail::put<std::int16_t>(os, static_cast<std::int16_t>(std::lround(c)));
    } else {
      detail::put<float>(os, static_cast<float>(v));
    }
  }
  if (!os) throw DataError("failed writing " + path.string());
}

/// Reads mono PCM16 or IEEE float32 WAV files.
inline Waveform read_wav(const fs::path& path) {
  auto is = detail::open_in(path);
  const std::string what = path.string();
  char id[4];
  auto tag4 = [&](const char* expect) {
    if (!is.read(id, 4) || std::memcmp(id, expect, 4) != 0) throw DataError(what + ": not a RIFF/WAVE file");
  };
  tag4("RIFF");
  detail::get<std::uint32_t>(is, what);
  tag4("WAVE");
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (is.read(id, 4)) {
    const auto size = detail::get<std::uint32_t>(is, what);
    if (std::memcmp(id, "fmt ", 4) == 0) {
      format = detail::get<std::uint16_t>(is, what);
      channels = detail::get<std::uint16_t>(is, what);
      rate = detail::get<std::uint32_t>(is, what);
      detail::get<std::uint32_t>(is, what);
      detail::get<std::uint16_t>(is, what);
      bits = detail::get<std::uint16_t>(is, what);
      is.seekg(size - 16, std::ios::cur);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw DataError(what + ": data chunk before fmt chunk");
      if (channels != 1) throw DataError(what + ": only mono audio is supported");
      Waveform w;
      w.rate_hz = rate;
      if (format == 1 && bits == 16) {
        w.samples.resize(size / 2);
        for (auto& v : w.samples) v = detail::get<std::int16_t>(is, what) / 32768.0;
      } else if (format == 3 && bits == 32) {
        w.samples.resize(size / 4);
        for (auto& v : w.samples) v = detail::get<float>(is, what);
      } else {
        throw DataError(what + ": unsupported sample format");
      }
      return w;
    } else {
      is.seekg(size + (size & 1u), std::ios::cur);
    }
  }
  throw DataError(what + ": no data chunk");
}

// ----------------------------------------------------------------------- EEG

inline void write_eeg(const fs::path& path, const EEGTrial& eeg) {
  auto os = detail::open_out(path);
  std::ostringstream header;
  header.precision(17);
  header << eeg.channels() << ',' << eeg.length() << ',' << eeg.rate_hz << '\n';
  os << header.str();
  for (double v : eeg.data.storage()) detail::put<float>(os, static_cast<float>(v));
  if (!os) throw DataError("failed writing " + path.string());
}

inline EEGTrial read_eeg(const fs::path& path) {
  auto is = detail::open_in(path);
  std::string header;
  if (!std::getline(is, header)) throw DataError(path.string() + ": missing header");
  std::size_t channels = 0, time = 0;
  double rate = 0;
  char c1 = 0, c2 = 0;
  std::istringstream hs(header);
  if (!(hs >> channels >> c1 >> time >> c2 >> rate) || c1 != ',' || c2 != ',')
    throw ParseError(path.string(), 1, "expected 'channels,time,rate'");
  EEGTrial eeg{Tensor<double>({channels, time}), rate, {}};
  for (auto& v : eeg.data.storage()) v = detail::get<float>(is, path.string());
  return eeg;
}

// ------------------------------------------------------------------ manifest

struct ManifestEntry {
  std::string id;
  std::string subject;
  std::string dir;  // relative to the manifest
  bool excluded = false;
  std::string split;  // "", "train", "val" or "test"
};

struct Manifest {
  std::string layout_id;
  double audio_rate_hz = 0;
  double eeg_rate_hz = 0;
  std::vector<ManifestEntry> trials;
  nlohmann::json extra;  // generator settings etc.
};

inline void to_json(nlohmann::json& j, const ManifestEntry& e) {
  j = {{"id", e.id}, {"subject", e.subject}, {"dir", e.dir}, {"excluded", e.excluded}, {"split", e.split}};
}

inline void from_json(const nlohmann::json& j, ManifestEntry& e) {
  e.id = j.at("id").get<std::string>();
  e.subject = j.value("subject", std::string{});
  e.dir = j.value("dir", e.id);
  e.excluded = j.value("excluded", false);
  e.split = j.value("split", std::string{});
}

inline void to_json(nlohmann::json& j, const Manifest& m) {
  j = {{"format", "gcbase-manifest/1"},
       {"layout_id", m.layout_id},
       {"audio_rate_hz", m.audio_rate_hz},
       {"eeg_rate_hz", m.eeg_rate_hz},
       {"trials", m.trials}};
  if (!m.extra.is_null()) j["extra"] = m.extra;
}

inline void from_json(const nlohmann::json& j, Manifest& m) {
  m.layout_id = j.value("layout_id", std::string{});
  m.audio_rate_hz = j.value("audio_rate_hz", 0.0);
  m.eeg_rate_hz = j.value("eeg_rate_hz", 0.0);
  m.trials = j.at("trials").get<std::vector<ManifestEntry>>();
  m.extra = j.value("extra", nlohmann::json{});
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  auto os = detail::open_out(path);
  os << j.dump(2) << '\n';
}

inline nlohmann::json read_json(const fs::path& path) {
  auto is = detail::open_in(path);
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
}

inline Manifest read_manifest(const fs::path& path) {
  try {
    return read_json(path).get<Manifest>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_manifest(const fs::path& path, const Manifest& m) { write_json(path, m); }

/// Writes one trial directory: mixture.wav, target.wav, interferer.wav, eeg.bin.
inline void write_trial(const fs::path& dir, const PairedTrial& t, WavFormat fmt = WavFormat::kFloat32) {
  fs::create_directories(dir);
  write_wav(dir / "mixture.wav", t.mixture, fmt);
  write_wav(dir / "target.wav", t.target, fmt);
  if (!t.interferer.samples.empty()) write_wav(dir / "interferer.wav", t.interferer, fmt);
  write_eeg(dir / "eeg.bin", t.eeg);
}

inline PairedTrial read_trial(const fs::path& dir, const ManifestEntry& e, const std::string& layout_id = {}) {
  PairedTrial t;
  t.id = e.id;
  t.subject = e.subject;
  t.mixture = read_wav(dir / "mixture.wav");
  t.target = read_wav(dir / "target.wav");
  if (fs::exists(dir / "interferer.wav")) t.interferer = read_wav(dir / "interferer.wav");
  t.eeg = read_eeg(dir / "eeg.bin");
  t.eeg.layout_id = layout_id;
  if (t.mixture.size() != t.target.size()) throw DataError(dir.string() + ": mixture and target lengths differ");
  return t;
}

}  // namespace gcbase::io
