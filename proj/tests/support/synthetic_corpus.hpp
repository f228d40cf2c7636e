// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Seeded pseudo-English text for training tests. A procedurally spelled
// vocabulary with Zipf frequencies, preferred successors per word and simple
// punctuation gives structure at the character, word and phrase level, so a
// small model keeps improving over millions of tokens.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace powerlr::testing {

namespace detail {

inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t draw(const std::vector<double>& cdf, std::mt19937_64& rng) {
  const double u = unit(rng) * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

}  // namespace detail

inline std::string synthetic_text(std::size_t n_bytes, std::uint64_t seed = 7) {
  static const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s",
                                  "t", "v", "w", "br", "ch", "st", "th", "tr", "sh", "pl", ""};
  static const char* kVowels[] = {"a", "e", "i", "o", "u", "ea", "ou", "ai"};
  static const char* kCodas[] = {"", "", "", "n", "r", "s", "t", "l", "nd", "st", "ng"};
  constexpr std::size_t kWords = 1200;
  constexpr std::size_t kSuccessors = 6;

  std::mt19937_64 rng(seed);
  auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

  std::vector<std::string> words;
  while (words.size() < kWords) {
    std::string w;
    const std::size_t syllables = 1 + pick(3);
    for (std::size_t i = 0; i < syllables; ++i) {
      w += kOnsets[pick(std::size(kOnsets))];
      w += kVowels[pick(std::size(kVowels))];
      w += kCodas[pick(std::size(kCodas))];
    }
    words.push_back(std::move(w));
  }
  // Zipf over ranks; short words tend to be frequent.
  std::stable_sort(words.begin(), words.end(),
                   [](const std::string& a, const std::string& b) { return a.size() < b.size(); });
  std::vector<double> cdf(kWords);
  double acc = 0.0;
  for (std::size_t r = 0; r < kWords; ++r) cdf[r] = acc += 1.0 / std::pow(double(r + 1), 1.1);

  std::vector<std::size_t> successors(kWords * kSuccessors);
  for (auto& s : successors) s = detail::draw(cdf, rng);

  std::string out;
  out.reserve(n_bytes + 256);
  std::size_t prev = detail::draw(cdf, rng);
  while (out.size() < n_bytes) {
    const std::size_t len = 4 + pick(10);
    for (std::size_t i = 0; i < len; ++i) {
      const std::size_t w = pick(10) < 6 ? successors[prev * kSuccessors + pick(kSuccessors)]
                                         : detail::draw(cdf, rng);
      std::string token = words[w];
      if (i == 0) token[0] = static_cast<char>(token[0] - 'a' + 'A');
      out += token;
      if (i + 1 < len) out += pick(12) == 0 ? ", " : " ";
      prev = w;
    }
    out += pick(8) == 0 ? ".\n" : ". ";
  }
  out.resize(n_bytes);
  return out;
}

inline std::vector<std::uint8_t> synthetic_bytes(std::size_t n_bytes, std::uint64_t seed = 7) {
  const std::string s = synthetic_text(n_bytes, seed);
  return {s.begin(), s.end()};
}

inline void write_synthetic_corpus(const std::filesystem::path& path, std::size_t n_bytes,
                                   std::uint64_t seed = 7) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  const std::string s = synthetic_text(n_bytes, seed);
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace powerlr::testing
