// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Single-file checkpoint of a trained model. Little-endian layout:
//
//   offset  size  field
//   0       8     magic "PWRLRCKP"
//   8       4     u32 format version (currently 1)
//   12      56    u64 x 7: n_layers, d_model, n_heads, d_head, mlp_hidden,
//                 vocab_size, sequence_length
//   68      8     u64 tokens_seen
//   76      4     u32 tensor count
//   then per tensor:
//           4     u32 name length L
//           L     name bytes (no terminator)
//           4     u32 ParamGroup value
//           8     u64 rows
//           8     u64 cols
//           8*rows*cols  f64 values, row-major
//
// Optimizer moments and the data RNG are not stored.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "powerlr/toy/model.hpp"

namespace powerlr::toy {

inline constexpr char kCheckpointMagic[8] = {'P', 'W', 'R', 'L', 'R', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  std::uint64_t tokens_seen = 0;
  Params params;
};

namespace detail {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) {
    throw std::runtime_error("checkpoint: truncated file");
  }
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  const auto& c = ck.config;
  for (std::uint64_t v : {c.n_layers, c.d_model, c.n_heads, c.d_head, c.mlp_hidden, c.vocab_size,
                          c.sequence_length}) {
    detail::put<std::uint64_t>(os, v);
  }
  detail::put<std::uint64_t>(os, ck.tokens_seen);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.params.size()));
  for (const auto& t : ck.params.tensors) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.group));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.rows()));
    detail::put<std::uint64_t>(os, static_cast<std::uint64_t>(t.value.cols()));
    os.write(reinterpret_cast<const char*>(t.value.data()),
             static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("'" + path.string() + "' is not a checkpoint");
  }
  const auto version = detail::get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  auto& c = ck.config;
  for (std::uint64_t* f : {&c.n_layers, &c.d_model, &c.n_heads, &c.d_head, &c.mlp_hidden,
                           &c.vocab_size, &c.sequence_length}) {
    *f = detail::get<std::uint64_t>(is);
  }
  ck.tokens_seen = detail::get<std::uint64_t>(is);
  ck.params = make_param_shapes(c);
  const auto count = detail::get<std::uint32_t>(is);
  if (count != ck.params.size()) throw std::runtime_error("checkpoint: tensor count mismatch");
  for (auto& t : ck.params.tensors) {
    std::string name(detail::get<std::uint32_t>(is), '\0');
    is.read(name.data(), static_cast<std::streamsize>(name.size()));
    const auto group = detail::get<std::uint32_t>(is);
    const auto rows = detail::get<std::uint64_t>(is);
    const auto cols = detail::get<std::uint64_t>(is);
    if (name != t.name || group != static_cast<std::uint32_t>(t.group) ||
        rows != static_cast<std::uint64_t>(t.value.rows()) ||
        cols != static_cast<std::uint64_t>(t.value.cols())) {
      throw std::runtime_error("checkpoint: unexpected tensor '" + name + "'");
    }
    if (!is.read(reinterpret_cast<char*>(t.value.data()),
                 static_cast<std::streamsize>(t.value.size() * sizeof(double)))) {
      throw std::runtime_error("checkpoint: truncated file");
    }
  }
  return ck;
}

}  // namespace powerlr::toy
