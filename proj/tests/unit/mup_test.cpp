// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "powerlr/mup.hpp"

namespace powerlr {
namespace {

MupConfig cfg(std::uint64_t d_model, std::uint64_t d_base) {
  MupConfig c;
  c.d_model = d_model;
  c.d_base = d_base;
  return c;
}

TEST(WidthMultiplier, TableWidths) {
  EXPECT_EQ(width_multiplier(cfg(128, 256)), 0.5);
  EXPECT_EQ(width_multiplier(cfg(512, 256)), 2.0);
  EXPECT_EQ(width_multiplier(cfg(256, 256)), 1.0);
}

TEST(DerivePlan, InternalLrDividesByWidth) {
  auto c = cfg(512, 256);
  c.base_lr = 0.0016;
  const auto plan = derive_plan(c);
  EXPECT_DOUBLE_EQ(plan_for(plan, ParamGroup::internal_matrix).lr, 0.0008);
  EXPECT_EQ(plan_for(plan, ParamGroup::input_embedding).lr, 0.0016);
  EXPECT_EQ(plan_for(plan, ParamGroup::output_embedding).lr, 0.0016);
  EXPECT_EQ(plan_for(plan, ParamGroup::vector_params).lr, 0.0016);
}

TEST(DerivePlan, InternalInitStdDividesBySqrtWidth) {
  auto c = cfg(512, 256);
  c.init_std = 0.02;
  const auto plan = derive_plan(c);
  EXPECT_NEAR(plan_for(plan, ParamGroup::internal_matrix).init_std, 0.0141421356, 1e-10);
  EXPECT_EQ(plan_for(plan, ParamGroup::input_embedding).init_std, 0.02);
}

TEST(DerivePlan, MultipliersLiveOnInputEmbeddingOnly) {
  auto c = cfg(256, 256);
  c.m_emb = 12.0;
  c.m_res = 0.26;
  const auto plan = derive_plan(c);
  EXPECT_EQ(plan_for(plan, ParamGroup::input_embedding).forward_multiplier, 12.0);
  EXPECT_EQ(plan_for(plan, ParamGroup::output_embedding).forward_multiplier, 1.0);
  EXPECT_EQ(plan_for(plan, ParamGroup::internal_matrix).forward_multiplier, 1.0);
  EXPECT_EQ(mup_scaling(c).residual_multiplier, 0.26);
}

TEST(DerivePlan, IdentityEqualsStandard) {
  const auto c = cfg(256, 256);
  EXPECT_EQ(derive_plan(c), standard_plan(c));
}

TEST(DerivePlan, EveryGroupOnceInEnumOrder) {
  const auto plan = derive_plan(cfg(64, 32));
  for (std::size_t i = 0; i < plan.size(); ++i) {
    EXPECT_EQ(plan[i].group, kAllParamGroups[i]);
    EXPECT_GT(plan[i].lr, 0.0);
    EXPECT_GT(plan[i].init_std, 0.0);
    EXPECT_GT(plan[i].forward_multiplier, 0.0);
  }
}

TEST(DerivePlan, RandomizedScalingLaws) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    MupConfig c;
    c.d_head = 1u << (rng() % 7);
    c.d_model = c.d_head * (1 + rng() % 32);
    c.d_base = 1 + rng() % 2048;
    c.init_std = 1e-3 + 0.1 * static_cast<double>(rng() % 1000) / 1000.0;
    c.base_lr = 1e-5 + 0.1 * static_cast<double>(rng() % 1000) / 1000.0;
    const auto plan = derive_plan(c);
    const double m = width_multiplier(c);
    const auto& internal = plan_for(plan, ParamGroup::internal_matrix);
    EXPECT_NEAR(internal.lr * m, plan_for(plan, ParamGroup::input_embedding).lr, 1e-15 * c.base_lr);
    EXPECT_NEAR(internal.init_std * internal.init_std * m, c.init_std * c.init_std,
                1e-14 * c.init_std * c.init_std);
  }
}

TEST(AttentionLogitScale, ReciprocalHeadSize) {
  EXPECT_EQ(attention_logit_scale(64), 0.015625);
  EXPECT_EQ(attention_logit_scale(1), 1.0);
  EXPECT_EQ(attention_logit_scale(4), 0.25);
  EXPECT_EQ(standard_attention_logit_scale(4), 0.5);
  EXPECT_THROW(attention_logit_scale(0), ValidationError);
}

TEST(Scaling, StandardIgnoresMupKnobs) {
  auto c = cfg(128, 32);
  c.m_emb = 3.0;
  c.m_res = 0.5;
  c.d_head = 16;
  const auto s = standard_scaling(c);
  EXPECT_EQ(s.m_width, 1.0);
  EXPECT_EQ(s.residual_multiplier, 1.0);
  EXPECT_EQ(s.attn_logit_scale, 0.25);
  EXPECT_EQ(s.group_lr(ParamGroup::internal_matrix, 0.01), 0.01);
  const auto m = mup_scaling(c);
  EXPECT_EQ(m.group_lr(ParamGroup::internal_matrix, 0.01), 0.0025);
  EXPECT_EQ(m.attn_logit_scale, 1.0 / 16.0);
}

TEST(MupConfig, Validation) {
  auto c = cfg(100, 256);
  c.d_head = 64;
  EXPECT_THROW(c.validate(), ValidationError);
  c = cfg(256, 0);
  EXPECT_THROW(c.validate(), ValidationError);
  c = cfg(256, 256);
  c.m_res = 0.0;
  EXPECT_THROW(derive_plan(c), ValidationError);
}

TEST(PlanCsv, Format) {
  auto c = cfg(512, 256);
  c.base_lr = 0.0016;
  std::ostringstream os;
  write_plan_csv(os, derive_plan(c));
  EXPECT_EQ(os.str(),
            "group,lr,init_std,forward_multiplier\n"
            "input_embedding,0.0016,0.02,1\n"
            "output_embedding,0.0016,0.02,1\n"
            "internal_matrix,0.0008,0.01414213562,1\n"
            "vector_params,0.0016,0.02,1\n");
}

}  // namespace
}  // namespace powerlr
