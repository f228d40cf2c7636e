// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Fitting gamma = a * T^b, where gamma = eta_opt / batch_size, by ordinary
// least squares in log-log space, and predicting eta_opt = batch * a * T^b.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "powerlr/error.hpp"
#include "powerlr/schedule.hpp"

namespace powerlr {

struct SweepPoint {
  Tokens tokens = 1;
  double gamma = 1.0;
};

struct FitResult {
  double a = 0.0;
  double b = 0.0;
  double rmse_log = 0.0;  // residual RMS in ln(gamma)
  std::size_t n_points = 0;
};

inline double gamma_of(double eta_opt, std::uint64_t batch) {
  detail::require(batch >= 1, "gamma_of: batch size must be >= 1");
  detail::require(eta_opt > 0.0, "gamma_of: eta_opt must be > 0");
  return eta_opt / static_cast<double>(batch);
}

inline double predict_opt_lr(double a, double b, std::uint64_t batch, Tokens tokens) {
  detail::require(a > 0.0, "predict_opt_lr: a must be > 0");
  detail::require(batch >= 1, "predict_opt_lr: batch size must be >= 1");
  detail::require(tokens >= 1, "predict_opt_lr: tokens must be >= 1");
  return static_cast<double>(batch) * a * std::exp(b * std::log(static_cast<double>(tokens)));
}

/// OLS fit of ln(gamma) = ln(a) + b ln(T). Needs at least two distinct T.
inline FitResult fit_power_law(std::span<const SweepPoint> points) {
  std::set<Tokens> distinct;
  for (const auto& p : points) {
    detail::require(p.tokens >= 1, "fit_power_law: tokens must be >= 1");
    detail::require(std::isfinite(p.gamma) && p.gamma > 0.0, "fit_power_law: gamma must be > 0");
    distinct.insert(p.tokens);
  }
  detail::require(distinct.size() >= 2,
                  "fit_power_law: need at least 2 distinct token counts, got " +
                      std::to_string(distinct.size()));

  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += std::log(static_cast<double>(p.tokens));
    my += std::log(p.gamma);
  }
  mx /= n;
  my /= n;

  // Centered sums keep the normal equations well conditioned; ln T sits
  // around 20-30 for realistic budgets.
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    const double dx = std::log(static_cast<double>(p.tokens)) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(p.gamma) - my);
  }
  FitResult r;
  r.b = sxy / sxx;
  const double intercept = my - r.b * mx;
  r.a = std::exp(intercept);
  double sse = 0.0;
  for (const auto& p : points) {
    const double res = std::log(p.gamma) - (intercept + r.b * std::log(static_cast<double>(p.tokens)));
    sse += res * res;
  }
  r.rmse_log = std::sqrt(sse / n);
  r.n_points = points.size();
  return r;
}

// --------------------------------------------------------------------------
// CSV surfaces.

/// Reads `tokens,gamma` rows (header required). Tokens may use scientific
/// notation.
inline std::vector<SweepPoint> read_points_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ValidationError("points csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tokens,gamma") {
    throw ValidationError("points csv: expected header 'tokens,gamma', got '" + line + "'");
  }
  std::vector<SweepPoint> out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ValidationError("points csv line " + std::to_string(lineno) + ": expected 2 fields");
    }
    double t = 0.0, g = 0.0;
    try {
      t = std::stod(line.substr(0, comma));
      g = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw ValidationError("points csv line " + std::to_string(lineno) + ": not a number");
    }
    if (!(t >= 1.0) || t != std::floor(t) || t > 1.8e19) {
      throw ValidationError("points csv line " + std::to_string(lineno) +
                            ": tokens must be a positive integer");
    }
    out.push_back({static_cast<Tokens>(t), g});
  }
  return out;
}

inline void write_fit_csv(std::ostream& os, const FitResult& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "a,b,rmse_log,n_points\n%.10g,%.10g,%.10g,%zu\n", r.a, r.b,
                r.rmse_log, r.n_points);
  os << buf;
}

inline std::string describe(const FitResult& r) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "gamma = %.6g * T^(%.6g)   rmse(ln gamma) = %.4g over %zu points",
                r.a, r.b, r.rmse_log, r.n_points);
  return buf;
}

}  // namespace powerlr
