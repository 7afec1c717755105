// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint file:
//   line 1   "GCBASE-CKPT 1"
//   line 2   byte length of the metadata JSON
//   ...      metadata JSON (full experiment config and run state)
//   u64      tensor count, then per tensor:
//            u32 name length, name bytes, u32 rank, u64 dims[rank],
//            float32 values (little-endian, row-major)

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcbase/errors.hpp"
#include "gcbase/io.hpp"
#include "gcbase/nn.hpp"

namespace gcbase {

inline constexpr const char* kCheckpointMagic = "GCBASE-CKPT 1";

struct Checkpoint {
  nlohmann::json meta;
  std::map<std::string, Tensor<float>> tensors;

  template <typename T>
  static Checkpoint capture(const nn::ParamList<T>& params, nlohmann::json meta = {}) {
    Checkpoint c;
    c.meta = std::move(meta);
    for (const auto* p : params) {
      if (c.tensors.count(p->name)) throw InvariantError("duplicate parameter name " + p->name);
      c.tensors.emplace(p->name, p->value.template cast<float>());
    }
    return c;
  }

  /// Copies stored values into `params`; names and shapes must match exactly.
  template <typename T>
  void restore(const nn::ParamList<T>& params) const {
    if (params.size() != tensors.size())
      throw DataError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model has " +
                      std::to_string(params.size()));
    for (auto* p : params) {
      auto it = tensors.find(p->name);
      if (it == tensors.end()) throw DataError("checkpoint lacks parameter " + p->name);
      if (it->second.shape() != p->value.shape())
        throw DataError("checkpoint shape mismatch for " + p->name + ": " + shape_str(it->second.shape()) + " vs " +
                        shape_str(p->value.shape()));
      p->value = it->second.template cast<T>();
    }
  }
};

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  auto os = io::detail::open_out(path);
  const std::string meta = c.meta.dump();
  os << kCheckpointMagic << '\n' << meta.size() << '\n' << meta;
  io::detail::put<std::uint64_t>(os, c.tensors.size());
  for (const auto& [name, t] : c.tensors) {
    io::detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    io::detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) io::detail::put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!os) throw DataError("failed writing checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto is = io::detail::open_in(path);
  const std::string what = path.string();
  std::string line;
  if (!std::getline(is, line) || line != kCheckpointMagic) throw DataError(what + ": not a checkpoint file");
  if (!std::getline(is, line)) throw DataError(what + ": truncated header");
  const auto meta_len = std::stoull(line);
  std::string meta(meta_len, '\0');
  if (!is.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw DataError(what + ": truncated metadata");
  Checkpoint c;
  c.meta = nlohmann::json::parse(meta);
  const auto count = io::detail::get<std::uint64_t>(is, what);
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name(io::detail::get<std::uint32_t>(is, what), '\0');
    if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw DataError(what + ": truncated name");
    Shape shape(io::detail::get<std::uint32_t>(is, what));
    for (auto& d : shape) d = io::detail::get<std::uint64_t>(is, what);
    Tensor<float> t(shape);
    if (!is.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float))))
      throw DataError(what + ": truncated tensor " + name);
    c.tensors.emplace(std::move(name), std::move(t));
  }
  return c;
}

}  // namespace gcbase
