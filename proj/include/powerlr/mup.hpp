// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Maximal update parametrization (muP) for width scaling.
//
// Relative to a base width d_base, a model of width d_model has width
// multiplier m_width = d_model / d_base and gets:
//   - embedding output multiplied by m_emb
//   - each attention / MLP block output multiplied by m_res before the residual add
//   - internal weight matrices initialized with std init_std / sqrt(m_width)
//   - internal weight matrices trained with lr base_lr / m_width
//   - attention logits divided by d_head (instead of sqrt(d_head))
// Embeddings, norm gains and biases keep the base LR and init std.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <string_view>

#include "powerlr/error.hpp"

namespace powerlr {

enum class ParamGroup { input_embedding, output_embedding, internal_matrix, vector_params };

inline constexpr std::array<ParamGroup, 4> kAllParamGroups = {
    ParamGroup::input_embedding, ParamGroup::output_embedding, ParamGroup::internal_matrix,
    ParamGroup::vector_params};

inline std::string_view to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::input_embedding: return "input_embedding";
    case ParamGroup::output_embedding: return "output_embedding";
    case ParamGroup::internal_matrix: return "internal_matrix";
    case ParamGroup::vector_params: return "vector_params";
  }
  return "?";
}

struct MupConfig {
  std::uint64_t d_base = 256;
  std::uint64_t d_model = 256;
  std::uint64_t d_head = 64;
  double m_emb = 1.0;
  double m_res = 1.0;
  double init_std = 0.02;
  double base_lr = 0.01;

  void validate() const {
    using detail::require;
    require(d_base >= 1, "mup.d_base must be >= 1");
    require(d_model >= 1, "mup.d_model must be >= 1");
    require(d_head >= 1, "mup.d_head must be >= 1");
    require(d_model % d_head == 0, "mup.d_model must be divisible by mup.d_head");
    require(std::isfinite(m_emb) && m_emb > 0.0, "mup.m_emb must be > 0");
    require(std::isfinite(m_res) && m_res > 0.0, "mup.m_res must be > 0");
    require(std::isfinite(init_std) && init_std > 0.0, "mup.init_std must be > 0");
    require(std::isfinite(base_lr) && base_lr > 0.0, "mup.base_lr must be > 0");
  }
};

struct ParamGroupPlan {
  ParamGroup group = ParamGroup::internal_matrix;
  double lr = 0.0;
  double init_std = 0.0;
  double forward_multiplier = 1.0;

  friend bool operator==(const ParamGroupPlan&, const ParamGroupPlan&) = default;
};

/// One entry per ParamGroup, indexed by the enum value.
using ParamPlan = std::array<ParamGroupPlan, 4>;

inline const ParamGroupPlan& plan_for(const ParamPlan& plan, ParamGroup g) {
  return plan[static_cast<std::size_t>(g)];
}

inline double width_multiplier(const MupConfig& cfg) {
  return static_cast<double>(cfg.d_model) / static_cast<double>(cfg.d_base);
}

/// 1 / d_head. Standard attention uses 1 / sqrt(d_head).
inline double attention_logit_scale(std::uint64_t d_head) {
  detail::require(d_head >= 1, "attention_logit_scale: d_head must be >= 1");
  return 1.0 / static_cast<double>(d_head);
}

inline double standard_attention_logit_scale(std::uint64_t d_head) {
  detail::require(d_head >= 1, "standard_attention_logit_scale: d_head must be >= 1");
  return 1.0 / std::sqrt(static_cast<double>(d_head));
}

/// Everything a model needs to apply a parametrization: group plan plus the
/// two multipliers that live in the forward pass rather than in a group.
struct ModelScaling {
  ParamPlan plan{};
  double m_width = 1.0;
  double residual_multiplier = 1.0;
  double attn_logit_scale = 1.0;
  std::uint64_t d_model = 0;
  std::uint64_t d_head = 0;

  /// Learning rate for `group` when the schedule's base LR is `base_lr`.
  double group_lr(ParamGroup group, double base_lr) const {
    return group == ParamGroup::internal_matrix ? base_lr / m_width : base_lr;
  }
};

inline ParamPlan derive_plan(const MupConfig& cfg) {
  cfg.validate();
  const double m = width_multiplier(cfg);
  ParamPlan plan{};
  plan[0] = {ParamGroup::input_embedding, cfg.base_lr, cfg.init_std, cfg.m_emb};
  plan[1] = {ParamGroup::output_embedding, cfg.base_lr, cfg.init_std, 1.0};
  plan[2] = {ParamGroup::internal_matrix, cfg.base_lr / m, cfg.init_std / std::sqrt(m), 1.0};
  // Norm gains start at 1 and the head bias at 0 whatever init_std says; the
  // field is kept at the base value so the plan stays comparable.
  plan[3] = {ParamGroup::vector_params, cfg.base_lr, cfg.init_std, 1.0};
  return plan;
}

/// The standard parametrization reference: every group at base LR and base
/// init std, no multipliers.
inline ParamPlan standard_plan(const MupConfig& cfg) {
  cfg.validate();
  ParamPlan plan{};
  for (std::size_t i = 0; i < plan.size(); ++i) {
    plan[i] = {kAllParamGroups[i], cfg.base_lr, cfg.init_std, 1.0};
  }
  return plan;
}

inline ModelScaling mup_scaling(const MupConfig& cfg) {
  ModelScaling s;
  s.plan = derive_plan(cfg);
  s.m_width = width_multiplier(cfg);
  s.residual_multiplier = cfg.m_res;
  s.attn_logit_scale = attention_logit_scale(cfg.d_head);
  s.d_model = cfg.d_model;
  s.d_head = cfg.d_head;
  return s;
}

/// Standard parametrization for the same shapes. d_base, m_emb and m_res are
/// ignored.
inline ModelScaling standard_scaling(const MupConfig& cfg) {
  ModelScaling s;
  s.plan = standard_plan(cfg);
  s.m_width = 1.0;
  s.residual_multiplier = 1.0;
  s.attn_logit_scale = standard_attention_logit_scale(cfg.d_head);
  s.d_model = cfg.d_model;
  s.d_head = cfg.d_head;
  return s;
}

inline void write_plan_csv(std::ostream& os, const ParamPlan& plan) {
  os << "group,lr,init_std,forward_multiplier\n";
  char buf[160];
  for (const auto& g : plan) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.10g\n", std::string(to_string(g.group)).c_str(),
                  g.lr, g.init_std, g.forward_multiplier);
    os << buf;
  }
}

inline void write_plan_table(std::ostream& os, const MupConfig& cfg, const ParamPlan& plan) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "m_width = %g  (d_model %llu / d_base %llu)\n",
                width_multiplier(cfg), static_cast<unsigned long long>(cfg.d_model),
                static_cast<unsigned long long>(cfg.d_base));
  os << buf;
  std::snprintf(buf, sizeof buf, "m_res = %g  attention logit scale = 1/%llu\n", cfg.m_res,
                static_cast<unsigned long long>(cfg.d_head));
  os << buf;
  std::snprintf(buf, sizeof buf, "%-18s %14s %14s %18s\n", "group", "lr", "init_std",
                "forward_multiplier");
  os << buf;
  for (const auto& g : plan) {
    std::snprintf(buf, sizeof buf, "%-18s %14.6g %14.6g %18.6g\n",
                  std::string(to_string(g.group)).c_str(), g.lr, g.init_std,
                  g.forward_multiplier);
    os << buf;
  }
}

}  // namespace powerlr
