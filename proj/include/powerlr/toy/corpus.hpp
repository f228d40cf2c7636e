// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Byte-level corpus: every byte is a token, vocabulary 256.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "powerlr/error.hpp"
#include "powerlr/hash.hpp"
#include "powerlr/toy/model.hpp"

namespace powerlr::toy {

inline constexpr double kDefaultTrainFraction = 0.99;

struct Corpus {
  std::vector<std::uint8_t> train;
  std::vector<std::uint8_t> holdout;
  std::uint64_t hash = 0;  // FNV-1a over the full byte stream

  std::string hash_hex() const { return to_hex(hash); }
};

/// Train stream is the first round(size * train_fraction) bytes, holdout the rest.
inline Corpus split_corpus(std::span<const std::uint8_t> bytes, double train_fraction) {
  powerlr::detail::require(train_fraction > 0.0 && train_fraction < 1.0,
                  "train_fraction must lie in (0, 1)");
  powerlr::detail::require(!bytes.empty(), "corpus is empty");
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(bytes.size()) * train_fraction));
  Corpus c;
  c.train.assign(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n_train));
  c.holdout.assign(bytes.begin() + static_cast<std::ptrdiff_t>(n_train), bytes.end());
  c.hash = Fnv1a64{}.update(bytes).digest();
  return c;
}

inline Corpus load_corpus(const std::filesystem::path& path,
                          double train_fraction = kDefaultTrainFraction) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (bytes.empty()) throw std::runtime_error("corpus '" + path.string() + "' is empty");
  return split_corpus(bytes, train_fraction);
}

// --------------------------------------------------------------------------
// Portable random helpers. Only raw mt19937_64 output is used so streams are
// identical across standard libraries.

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  // (0, 1), never exactly 0
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline double normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) { return rng() % n; }

/// `n_seqs` windows at random offsets of `stream`; targets are inputs shifted by one.
inline Batch sample_batch(std::span<const std::uint8_t> stream, std::size_t n_seqs,
                          std::size_t seq_len, Rng& rng) {
  powerlr::detail::require(stream.size() > seq_len,
                  "token stream of " + std::to_string(stream.size()) +
                      " bytes is too short for sequence length " + std::to_string(seq_len));
  Batch b;
  b.n_seqs = n_seqs;
  b.seq_len = seq_len;
  b.inputs.resize(n_seqs * seq_len);
  b.targets.resize(n_seqs * seq_len);
  const std::uint64_t n_offsets = stream.size() - seq_len;
  for (std::size_t i = 0; i < n_seqs; ++i) {
    const auto off = static_cast<std::size_t>(uniform_below(rng, n_offsets));
    for (std::size_t t = 0; t < seq_len; ++t) {
      b.inputs[i * seq_len + t] = stream[off + t];
      b.targets[i * seq_len + t] = stream[off + t + 1];
    }
  }
  return b;
}

/// Consecutive non-overlapping windows starting at `first_window`.
inline Batch contiguous_batch(std::span<const std::uint8_t> stream, std::size_t first_window,
                              std::size_t n_seqs, std::size_t seq_len) {
  powerlr::detail::require((first_window + n_seqs) * seq_len < stream.size(),
                           "contiguous_batch: windows run past the end of the stream");
  Batch b;
  b.n_seqs = n_seqs;
  b.seq_len = seq_len;
  b.inputs.resize(n_seqs * seq_len);
  b.targets.resize(n_seqs * seq_len);
  for (std::size_t i = 0; i < n_seqs; ++i) {
    const std::size_t off = (first_window + i) * seq_len;
    for (std::size_t t = 0; t < seq_len; ++t) {
      b.inputs[i * seq_len + t] = stream[off + t];
      b.targets[i * seq_len + t] = stream[off + t + 1];
    }
  }
  return b;
}

/// Unigram entropy of a byte stream in nats, the loss of the best
/// context-free predictor.
inline double unigram_entropy(std::span<const std::uint8_t> stream) {
  std::array<double, 256> counts{};
  for (auto b : stream) counts[b] += 1.0;
  const double n = static_cast<double>(stream.size());
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= c / n * std::log(c / n);
  }
  return h;
}

}  // namespace powerlr::toy
