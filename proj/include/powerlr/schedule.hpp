// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Token-indexed learning-rate schedules: constant, cosine, warmup-stable-decay
// (WSD) and the power schedule min(eta_max, batch * a * n^b).
//
// Every schedule is a pure function of (spec, tokens trained). Callers that
// think in optimizer steps convert with tokens = steps * batch * seq_len.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "powerlr/error.hpp"

namespace powerlr {

using Tokens = std::uint64_t;

enum class ScheduleKind { constant, cosine, wsd, power };
enum class DecayShape { linear, cosine, exponential };

inline constexpr double kDefaultEtaMax = 0.02;
inline constexpr double kDefaultFloorRatio = 1e-2;

struct DecaySpec {
  DecayShape shape = DecayShape::linear;
  // Only read for exponential decay: multiplier reached at the final token.
  double floor_ratio = kDefaultFloorRatio;
};

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::wsd;

  double peak_lr = 0.0;  // constant / cosine / wsd

  double power_a = 4.0;  // power only
  double power_b = -0.51;
  double eta_max = kDefaultEtaMax;
  std::uint64_t batch_size = 1;

  Tokens warmup_tokens = 0;
  Tokens decay_tokens = 0;
  // Required for cosine and wsd. Power and constant schedules run open-ended
  // without it, and their decay phase only exists once it is set.
  std::optional<Tokens> total_tokens;

  DecaySpec decay;
  double min_lr = 0.0;  // cosine floor

  void validate() const;
};

// --------------------------------------------------------------------------
// Enum names, shared with the config loader.

inline std::string_view to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::constant: return "constant";
    case ScheduleKind::cosine: return "cosine";
    case ScheduleKind::wsd: return "wsd";
    case ScheduleKind::power: return "power";
  }
  return "?";
}

inline std::string_view to_string(DecayShape s) {
  switch (s) {
    case DecayShape::linear: return "linear";
    case DecayShape::cosine: return "cosine";
    case DecayShape::exponential: return "exponential";
  }
  return "?";
}

inline ScheduleKind parse_schedule_kind(std::string_view s) {
  if (s == "constant") return ScheduleKind::constant;
  if (s == "cosine") return ScheduleKind::cosine;
  if (s == "wsd") return ScheduleKind::wsd;
  if (s == "power") return ScheduleKind::power;
  throw ValidationError("unknown schedule kind '" + std::string(s) + "'");
}

inline DecayShape parse_decay_shape(std::string_view s) {
  if (s == "linear") return DecayShape::linear;
  if (s == "cosine") return DecayShape::cosine;
  if (s == "exponential") return DecayShape::exponential;
  throw ValidationError("unknown decay shape '" + std::string(s) + "'");
}

inline std::ostream& operator<<(std::ostream& os, ScheduleKind k) { return os << to_string(k); }
inline std::ostream& operator<<(std::ostream& os, DecayShape s) { return os << to_string(s); }

// --------------------------------------------------------------------------

inline void ScheduleSpec::validate() const {
  using detail::require;
  const bool uses_peak = kind != ScheduleKind::power;
  if (uses_peak) {
    require(std::isfinite(peak_lr) && peak_lr > 0.0, "schedule.peak_lr must be > 0");
  } else {
    require(std::isfinite(power_a) && power_a > 0.0, "schedule.power_a must be > 0");
    require(std::isfinite(power_b), "schedule.power_b must be finite");
    require(std::isfinite(eta_max) && eta_max > 0.0, "schedule.eta_max must be > 0");
    require(batch_size >= 1, "schedule.batch_size must be >= 1");
  }
  if (kind == ScheduleKind::cosine || kind == ScheduleKind::wsd) {
    require(total_tokens.has_value(),
            "schedule.total_tokens is required for kind=" + std::string(to_string(kind)));
  }
  if (total_tokens) {
    require(*total_tokens >= 1, "schedule.total_tokens must be >= 1");
    require(warmup_tokens <= *total_tokens && decay_tokens <= *total_tokens - warmup_tokens,
            "schedule.warmup_tokens + schedule.decay_tokens must not exceed total_tokens");
  }
  if (kind == ScheduleKind::cosine) {
    require(decay_tokens == 0, "schedule.decay_tokens must be 0 for kind=cosine");
    require(*total_tokens > warmup_tokens, "cosine schedule needs total_tokens > warmup_tokens");
    require(std::isfinite(min_lr) && min_lr >= 0.0 && min_lr <= peak_lr,
            "schedule.min_lr must lie in [0, peak_lr]");
  }
  if (decay.shape == DecayShape::exponential) {
    require(decay.floor_ratio > 0.0 && decay.floor_ratio < 1.0,
            "schedule.floor_ratio must lie in (0, 1)");
  }
}

/// min(eta_max, batch * a * n^b) with n^b evaluated as exp(b ln n).
/// Throws std::domain_error for n = 0 with b < 0, where the power diverges.
inline double power_lr(std::uint64_t batch, double a, double b, double eta_max, Tokens n) {
  double scale;
  if (n == 0) {
    if (b < 0.0) throw std::domain_error("power_lr: n = 0 is singular for b < 0");
    scale = b == 0.0 ? 1.0 : 0.0;
  } else {
    scale = std::exp(b * std::log(static_cast<double>(n)));
  }
  const double raw = static_cast<double>(batch) * a * scale;
  return std::min(eta_max, raw);
}

/// Token count past which the power LR drops below eta_max. Returns 0 when the
/// clamp never engages (b >= 0 or batch * a <= eta_max).
inline double clamp_crossover(std::uint64_t batch, double a, double b, double eta_max) {
  const double amp = static_cast<double>(batch) * a;
  if (b >= 0.0 || amp <= eta_max) return 0.0;
  return std::pow(amp / eta_max, 1.0 / -b);
}

inline double clamp_crossover(const ScheduleSpec& spec) {
  return clamp_crossover(spec.batch_size, spec.power_a, spec.power_b, spec.eta_max);
}

namespace detail {

inline double power_at(const ScheduleSpec& s, Tokens n) {
  return power_lr(s.batch_size, s.power_a, s.power_b, s.eta_max, n == 0 ? 1 : n);
}

// Multiplier in [0, 1] for progress p in (0, 1] through the decay phase.
inline double decay_factor(const DecaySpec& d, double p) {
  switch (d.shape) {
    case DecayShape::linear: return 1.0 - p;
    case DecayShape::cosine: return 0.5 * (1.0 + std::cos(std::numbers::pi * p));
    case DecayShape::exponential: return std::pow(d.floor_ratio, p);
  }
  return 1.0;
}

// Value the stable phase takes at a phase boundary; warmup ramps up to it and
// decay scales down from it.
inline double phase_entry(const ScheduleSpec& s, Tokens boundary) {
  return s.kind == ScheduleKind::power ? power_at(s, boundary) : s.peak_lr;
}

}  // namespace detail

/// Learning rate after `n` tokens. Throws ValidationError on an invalid spec
/// and std::out_of_range for n past total_tokens.
inline double lr_at(const ScheduleSpec& s, Tokens n) {
  if ((s.kind == ScheduleKind::cosine || s.kind == ScheduleKind::wsd) && !s.total_tokens) {
    throw ValidationError("lr_at: kind=" + std::string(to_string(s.kind)) +
                          " requires total_tokens");
  }
  if (s.total_tokens && n > *s.total_tokens) {
    throw std::out_of_range("lr_at: n=" + std::to_string(n) + " exceeds total_tokens=" +
                            std::to_string(*s.total_tokens));
  }

  if (n < s.warmup_tokens) {
    return static_cast<double>(n) / static_cast<double>(s.warmup_tokens) *
           detail::phase_entry(s, s.warmup_tokens);
  }

  if (s.total_tokens && s.decay_tokens > 0) {
    const Tokens decay_start = *s.total_tokens - s.decay_tokens;
    if (n > decay_start) {
      const double p = static_cast<double>(n - decay_start) / static_cast<double>(s.decay_tokens);
      return detail::decay_factor(s.decay, p) * detail::phase_entry(s, decay_start);
    }
  }

  switch (s.kind) {
    case ScheduleKind::constant:
    case ScheduleKind::wsd:
      return s.peak_lr;
    case ScheduleKind::power:
      return detail::power_at(s, n);
    case ScheduleKind::cosine: {
      const double p = static_cast<double>(n - s.warmup_tokens) /
                       static_cast<double>(*s.total_tokens - s.warmup_tokens);
      return s.min_lr + 0.5 * (s.peak_lr - s.min_lr) * (1.0 + std::cos(std::numbers::pi * p));
    }
  }
  return 0.0;
}

struct CurvePoint {
  Tokens tokens;
  double lr;
};

/// Samples lr_at on [start, end] every `stride` tokens; `end` is always the
/// last sample, so the curve holds ceil((end - start) / stride) + 1 points.
inline std::vector<CurvePoint> emit_curve(const ScheduleSpec& s, Tokens start, Tokens end,
                                          Tokens stride) {
  detail::require(start < end, "emit_curve: start must be < end");
  detail::require(stride >= 1, "emit_curve: stride must be >= 1");
  const Tokens span = end - start;
  const Tokens count = span / stride + (span % stride != 0 ? 1 : 0) + 1;
  std::vector<CurvePoint> out;
  out.reserve(count);
  for (Tokens i = 0; i < count; ++i) {
    const Tokens n = i + 1 == count ? end : start + i * stride;
    out.push_back({n, lr_at(s, n)});
  }
  return out;
}

/// CSV with header `tokens,lr`, LR to 10 significant digits.
inline void write_curve_csv(std::ostream& os, const std::vector<CurvePoint>& curve) {
  os << "tokens,lr\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.10g", p.lr);
    os << p.tokens << ',' << buf << '\n';
  }
}

}  // namespace powerlr
