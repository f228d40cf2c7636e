// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "powerlr/powerlaw_fit.hpp"

namespace powerlr {
namespace {

const std::vector<Tokens> kTableGrid = {2'000'000'000,  4'000'000'000,  8'000'000'000,
                                        16'000'000'000, 32'000'000'000, 64'000'000'000,
                                        128'000'000'000, 256'000'000'000};

std::vector<SweepPoint> exact_points(double a, double b, const std::vector<Tokens>& grid) {
  std::vector<SweepPoint> pts;
  for (Tokens t : grid) {
    pts.push_back({t, static_cast<double>(a * std::pow(static_cast<long double>(t), b))});
  }
  return pts;
}

TEST(GammaOf, Examples) {
  EXPECT_DOUBLE_EQ(gamma_of(0.0128, 128), 1e-4);
  EXPECT_DOUBLE_EQ(gamma_of(0.0064, 512), 1.25e-5);
  EXPECT_EQ(gamma_of(0.37, 1), 0.37);
  EXPECT_THROW(gamma_of(0.0, 8), ValidationError);
  EXPECT_THROW(gamma_of(0.1, 0), ValidationError);
}

TEST(PredictOptLr, Examples) {
  EXPECT_NEAR(predict_opt_lr(4.6, -0.51, 1024, 10'000'000'000'000), 0.0011, 0.0011 * 0.05);
  EXPECT_EQ(predict_opt_lr(4.6, -0.51, 1, 1), 4.6);
  const double oracle = 128.0 * 4.6 * std::pow(2e9L, -0.51L);
  EXPECT_NEAR(predict_opt_lr(4.6, -0.51, 128, 2'000'000'000), oracle, 1e-15);
  EXPECT_NEAR(oracle, 0.0106, 0.00005);
  EXPECT_THROW(predict_opt_lr(4.6, -0.51, 128, 0), ValidationError);
  EXPECT_THROW(predict_opt_lr(-1.0, -0.51, 128, 10), ValidationError);
}

TEST(FitPowerLaw, RecoversExactLaw) {
  const auto r = fit_power_law(exact_points(4.6, -0.51, kTableGrid));
  EXPECT_NEAR(r.a / 4.6, 1.0, 1e-9);
  EXPECT_NEAR(r.b, -0.51, 1e-12);
  EXPECT_LT(r.rmse_log, 1e-12);
  EXPECT_EQ(r.n_points, kTableGrid.size());
}

TEST(FitPowerLaw, TwoPointLine) {
  const std::vector<SweepPoint> pts = {{1, 1.0}, {1000, 1000.0}};
  const auto r = fit_power_law(pts);
  EXPECT_NEAR(r.a, 1.0, 1e-12);
  EXPECT_NEAR(r.b, 1.0, 1e-12);
}

TEST(FitPowerLaw, NeedsTwoDistinctBudgets) {
  const std::vector<SweepPoint> pts = {{100, 1.0}, {100, 2.0}};
  EXPECT_THROW(fit_power_law(pts), ValidationError);
  EXPECT_THROW(fit_power_law(std::vector<SweepPoint>{}), ValidationError);
  const std::vector<SweepPoint> bad = {{100, 1.0}, {200, -2.0}};
  EXPECT_THROW(fit_power_law(bad), ValidationError);
}

TEST(FitPowerLaw, ScaleEquivariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<SweepPoint> pts = exact_points(3.0, -0.4, kTableGrid);
  for (auto& p : pts) p.gamma *= std::exp(noise(rng));
  const auto base = fit_power_law(pts);
  for (double k : {0.001, 7.0, 1e6}) {
    auto scaled = pts;
    for (auto& p : scaled) p.gamma *= k;
    const auto r = fit_power_law(scaled);
    EXPECT_NEAR(r.a / (base.a * k), 1.0, 1e-12);
    EXPECT_NEAR(r.b, base.b, 1e-12);
  }
}

TEST(FitPowerLaw, ExponentInvarianceUnderTokenRescale) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> noise(0.0, 0.2);
  std::vector<SweepPoint> pts = exact_points(3.0, -0.4, kTableGrid);
  for (auto& p : pts) p.gamma *= std::exp(noise(rng));
  const auto base = fit_power_law(pts);
  for (Tokens k : {Tokens{2}, Tokens{10}, Tokens{1000}}) {
    auto scaled = pts;
    for (auto& p : scaled) p.tokens /= k;  // grid values are divisible by these k
    const auto r = fit_power_law(scaled);
    EXPECT_NEAR(r.b, base.b, 1e-12);
    EXPECT_NEAR(r.a / (base.a * std::pow(static_cast<double>(k), base.b)), 1.0, 1e-11);
  }
}

TEST(FitPowerLaw, NoiseRobustness) {
  int within = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.05);
    auto pts = exact_points(4.6, -0.51, kTableGrid);
    for (auto& p : pts) p.gamma *= std::exp(noise(rng));
    if (std::abs(fit_power_law(pts).b + 0.51) <= 0.05) ++within;
  }
  EXPECT_GE(within, 950);
}

TEST(PointsCsv, ParsesScientificTokens) {
  std::istringstream is("tokens,gamma\n2e9,1e-4\r\n4000000000,5e-5\n\n");
  const auto pts = read_points_csv(is);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[0].tokens, 2'000'000'000u);
  EXPECT_EQ(pts[1].gamma, 5e-5);
}

TEST(PointsCsv, RejectsMalformedInput) {
  std::istringstream no_header("1,2\n");
  EXPECT_THROW(read_points_csv(no_header), ValidationError);
  std::istringstream bad_field("tokens,gamma\nabc,1\n");
  EXPECT_THROW(read_points_csv(bad_field), ValidationError);
  std::istringstream fractional("tokens,gamma\n1.5,1\n");
  EXPECT_THROW(read_points_csv(fractional), ValidationError);
}

TEST(FitCsv, SingleRow) {
  std::ostringstream os;
  write_fit_csv(os, {4.6, -0.51, 0.0, 8});
  EXPECT_EQ(os.str(), "a,b,rmse_log,n_points\n4.6,-0.51,0,8\n");
}

}  // namespace
}  // namespace powerlr
