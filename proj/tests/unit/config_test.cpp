// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "powerlr/config.hpp"
#include "support/temp_dir.hpp"

namespace powerlr {
namespace {

ToolConfig parse(const char* text) { return parse_config(Json::parse(text)); }

TEST(Config, ScheduleDefaultsFromTrain) {
  const auto cfg = parse(R"({
    "schedule": {"kind": "power", "warmup_tokens": 100},
    "train": {"batch_size": 32, "total_tokens": 5000}
  })");
  ASSERT_TRUE(cfg.schedule);
  EXPECT_EQ(cfg.schedule->kind, ScheduleKind::power);
  EXPECT_EQ(cfg.schedule->batch_size, 32u);
  EXPECT_EQ(cfg.schedule->total_tokens, 5000u);
  EXPECT_EQ(cfg.schedule->power_a, 4.0);
  EXPECT_EQ(cfg.schedule->power_b, -0.51);
  EXPECT_EQ(cfg.schedule->eta_max, 0.02);
  EXPECT_EQ(cfg.schedule->decay.shape, DecayShape::exponential);
  EXPECT_FALSE(cfg.decay_shape_explicit);
  EXPECT_EQ(cfg.train->train.precision, toy::Precision::float32);
}

TEST(Config, MupFollowsModel) {
  const auto cfg = parse(R"({
    "model": {"d_model": 64, "n_heads": 4, "d_head": 16},
    "mup": {"d_base": 32}
  })");
  EXPECT_EQ(cfg.mup->d_model, 64u);
  EXPECT_EQ(cfg.mup->d_head, 16u);
  EXPECT_EQ(width_multiplier(*cfg.mup), 2.0);
  EXPECT_THROW(parse(R"({"model": {"d_model": 64, "n_heads": 4, "d_head": 16},
                         "mup": {"d_model": 128}})"),
               ValidationError);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse(R"({"schedule": {"kind": "wsd", "peak": 0.1}})"), ValidationError);
  EXPECT_THROW(parse(R"({"scheduel": {}})"), ValidationError);
  EXPECT_THROW(parse(R"({"schedule": {"kind": "triangle"}})"), ValidationError);
  EXPECT_THROW(parse(R"({"train": {"batch_size": -4}})"), ValidationError);
  EXPECT_THROW(parse(R"({"train": {"batch_size": 2.5}})"), ValidationError);
  EXPECT_THROW(parse(R"({"train": {"precision": "half"}})"), ValidationError);
  EXPECT_THROW(parse(R"({"train": {"train_fraction": 1.0}})"), ValidationError);
  EXPECT_THROW(parse(R"({"sweep": {"etas": [0.1], "betas": [8], "token_budgets": [1000]}})"),
               ValidationError);
}

TEST(Config, SweepSection) {
  const auto cfg = parse(R"({
    "train": {"seed": 5},
    "sweep": {
      "etas": [0.001, 0.002], "betas": [8, 16], "token_budgets": [1000000],
      "models": [{"label": "tiny", "d_model": 32, "n_heads": 2, "d_head": 16}]
    }
  })");
  const auto& g = cfg.sweep->grid;
  EXPECT_EQ(g.seeds, std::vector<std::uint64_t>{5});
  EXPECT_EQ(g.model_sizes.at(0).label, "tiny");
  EXPECT_EQ(g.model_sizes.at(0).config.d_model, 32u);
  EXPECT_EQ(cfg.sweep_decay(ScheduleKind::power).shape, DecayShape::exponential);
  EXPECT_EQ(cfg.sweep_decay(ScheduleKind::wsd).shape, DecayShape::linear);
}

TEST(Config, LoadFileWithComments) {
  testing::TempDir dir;
  const auto path = dir.path() / "c.json";
  std::ofstream(path) << "{\n  // peak LR\n  \"schedule\": {\"kind\": \"constant\", \"peak_lr\": 0.1}\n}\n";
  EXPECT_EQ(load_config(path).schedule->peak_lr, 0.1);
  std::ofstream(path) << "{ not json";
  EXPECT_THROW(load_config(path), ValidationError);
  EXPECT_THROW(load_config(dir.path() / "absent.json"), std::runtime_error);
}

TEST(Config, ShippedExamplesParse) {
  for (const auto& entry : std::filesystem::directory_iterator(POWERLR_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    SCOPED_TRACE(entry.path().string());
    EXPECT_NO_THROW(load_config(entry.path()));
  }
}

}  // namespace
}  // namespace powerlr
