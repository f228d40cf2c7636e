// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Tool configuration: one JSON document with optional sections `schedule`,
// `mup`, `model`, `train` and `sweep`. Keys are lower_snake_case; an unknown
// key anywhere is a ValidationError naming it. Token counts may be written in
// scientific notation (1e9) as long as the value is integral.
//
// Cross-section defaults:
//   - mup.d_model / mup.d_head default to the model section; d_base defaults
//     to d_model (m_width = 1); base_lr defaults to schedule.peak_lr.
//   - schedule.total_tokens defaults to train.total_tokens; schedule.batch_size
//     defaults to train.batch_size.
//   - sweep.models defaults to the model section, labelled "default".

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "powerlr/error.hpp"
#include "powerlr/mup.hpp"
#include "powerlr/schedule.hpp"
#include "powerlr/sweep.hpp"
#include "powerlr/toy/model.hpp"
#include "powerlr/toy/trainer.hpp"

namespace powerlr {

using Json = nlohmann::json;

struct TrainSection {
  std::string corpus;
  double train_fraction = 0.99;
  toy::TrainConfig train;
};

struct SweepSection {
  sweep::SweepGrid grid;
  std::size_t top_k = sweep::kDefaultTopK;
  std::optional<Tokens> warmup_tokens;  // overrides schedule.warmup_tokens
};

struct ToolConfig {
  std::optional<ScheduleSpec> schedule;
  bool decay_shape_explicit = false;
  std::optional<MupConfig> mup;
  std::optional<toy::ModelConfig> model;
  std::optional<TrainSection> train;
  std::optional<SweepSection> sweep;

  /// The decay a sweep run should use: the schedule section's if it named a
  /// shape, else linear for wsd/cosine and exponential(1e-2) for power.
  DecaySpec sweep_decay(ScheduleKind kind) const {
    if (decay_shape_explicit && schedule) return schedule->decay;
    if (kind == ScheduleKind::power) return {DecayShape::exponential, kDefaultFloorRatio};
    return {DecayShape::linear, kDefaultFloorRatio};
  }
};

namespace detail {

// Reads keys out of one JSON object and rejects whatever is left over.
class SectionReader {
 public:
  SectionReader(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    require(obj_.is_object(), "'" + path_ + "' must be an object");
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    return obj_.at(key);
  }

  double real(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    require(v.is_number(), where(key) + " must be a number");
    return v.get<double>();
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    return as_count(raw(key), where(key));
  }

  std::optional<std::uint64_t> opt_count(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return as_count(raw(key), where(key));
  }

  bool flag(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    require(v.is_boolean(), where(key) + " must be true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, std::string fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    require(v.is_string(), where(key) + " must be a string");
    return v.get<std::string>();
  }

  std::vector<double> reals(const std::string& key) {
    std::vector<double> out;
    for (const auto& v : array(key)) {
      require(v.is_number(), where(key) + " must hold numbers");
      out.push_back(v.get<double>());
    }
    return out;
  }

  std::vector<std::uint64_t> counts(const std::string& key) {
    std::vector<std::uint64_t> out;
    for (const auto& v : array(key)) out.push_back(as_count(v, where(key)));
    return out;
  }

  const Json& array(const std::string& key) {
    require(has(key), "missing required key " + where(key));
    const Json& v = raw(key);
    require(v.is_array(), where(key) + " must be an array");
    return v;
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.contains(key)) throw ValidationError("unknown key '" + path_ + "." + key + "'");
    }
  }

  static std::uint64_t as_count(const Json& v, const std::string& what) {
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.is_number_integer()) {
      require(v.get<std::int64_t>() >= 0, what + " must be non-negative");
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    require(v.is_number_float(), what + " must be a non-negative integer");
    const double d = v.get<double>();
    require(d >= 0.0 && d == std::floor(d) && d < 1.8e19, what + " must be a non-negative integer");
    return static_cast<std::uint64_t>(d);
  }

 private:
  std::string where(const std::string& key) const { return "'" + path_ + "." + key + "'"; }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline toy::ModelConfig read_model(SectionReader& r) {
  toy::ModelConfig m;
  m.n_layers = r.count("n_layers", m.n_layers);
  m.d_model = r.count("d_model", m.d_model);
  m.n_heads = r.count("n_heads", m.n_heads);
  m.d_head = r.count("d_head", m.d_head);
  m.mlp_hidden = r.count("mlp_hidden", m.mlp_hidden);
  m.vocab_size = r.count("vocab_size", m.vocab_size);
  m.sequence_length = r.count("sequence_length", m.sequence_length);
  return m;
}

}  // namespace detail

inline ToolConfig parse_config(const Json& doc) {
  using detail::SectionReader;
  using detail::require;
  SectionReader root(doc, "config");
  ToolConfig cfg;

  // Raw reads first; cross-section defaults are resolved afterwards.
  std::optional<std::uint64_t> sched_total, sched_batch;
  if (root.has("schedule")) {
    SectionReader r(root.raw("schedule"), "schedule");
    ScheduleSpec s;
    s.kind = parse_schedule_kind(r.text("kind", "wsd"));
    s.peak_lr = r.real("peak_lr", 0.0);
    s.power_a = r.real("power_a", s.power_a);
    s.power_b = r.real("power_b", s.power_b);
    s.eta_max = r.real("eta_max", s.eta_max);
    sched_batch = r.opt_count("batch_size");
    s.warmup_tokens = r.count("warmup_tokens", 0);
    s.decay_tokens = r.count("decay_tokens", 0);
    sched_total = r.opt_count("total_tokens");
    cfg.decay_shape_explicit = r.has("decay_shape");
    s.decay.shape = parse_decay_shape(
        r.text("decay_shape", s.kind == ScheduleKind::power ? "exponential" : "linear"));
    s.decay.floor_ratio = r.real("floor_ratio", kDefaultFloorRatio);
    s.min_lr = r.real("min_lr", 0.0);
    r.finish();
    cfg.schedule = s;
  }

  if (root.has("model")) {
    SectionReader r(root.raw("model"), "model");
    cfg.model = detail::read_model(r);
    r.finish();
    cfg.model->validate();
  }

  if (root.has("mup")) {
    SectionReader r(root.raw("mup"), "mup");
    MupConfig m;
    m.d_model = r.count("d_model", cfg.model ? cfg.model->d_model : m.d_model);
    m.d_head = r.count("d_head", cfg.model ? cfg.model->d_head : m.d_head);
    m.d_base = r.count("d_base", m.d_model);
    m.m_emb = r.real("m_emb", 1.0);
    m.m_res = r.real("m_res", 1.0);
    m.init_std = r.real("init_std", m.init_std);
    m.base_lr = r.real("base_lr", cfg.schedule && cfg.schedule->peak_lr > 0.0
                                      ? cfg.schedule->peak_lr
                                      : m.base_lr);
    r.finish();
    m.validate();
    if (cfg.model) {
      require(m.d_model == cfg.model->d_model && m.d_head == cfg.model->d_head,
              "mup.d_model / mup.d_head disagree with the model section");
    }
    cfg.mup = m;
  }

  if (root.has("train")) {
    SectionReader r(root.raw("train"), "train");
    TrainSection t;
    t.corpus = r.text("corpus", "");
    t.train_fraction = r.real("train_fraction", t.train_fraction);
    auto& tc = t.train;
    tc.batch_size = r.count("batch_size", tc.batch_size);
    tc.total_tokens = r.count("total_tokens", tc.total_tokens);
    tc.seed = r.count("seed", tc.seed);
    tc.eval_tokens = r.count("eval_tokens", tc.eval_tokens);
    tc.history_interval_tokens = r.count("history_interval_tokens", tc.history_interval_tokens);
    tc.use_mup = r.flag("use_mup", tc.use_mup);
    tc.precision = toy::parse_precision(r.text("precision", toy::to_string(tc.precision)));
    tc.optimizer.beta1 = r.real("beta1", tc.optimizer.beta1);
    tc.optimizer.beta2 = r.real("beta2", tc.optimizer.beta2);
    tc.optimizer.eps = r.real("eps", tc.optimizer.eps);
    tc.optimizer.weight_decay = r.real("weight_decay", tc.optimizer.weight_decay);
    r.finish();
    require(t.train_fraction > 0.0 && t.train_fraction < 1.0,
            "train.train_fraction must lie in (0, 1)");
    tc.optimizer.validate();
    cfg.train = t;
  }

  if (cfg.schedule) {
    auto& s = *cfg.schedule;
    if (sched_total) {
      s.total_tokens = *sched_total;
    } else if (cfg.train) {
      s.total_tokens = cfg.train->train.total_tokens;
    }
    s.batch_size = sched_batch ? *sched_batch : (cfg.train ? cfg.train->train.batch_size : 1);
    s.validate();
  }

  if (root.has("sweep")) {
    SectionReader r(root.raw("sweep"), "sweep");
    SweepSection sw;
    auto& g = sw.grid;
    g.etas = r.reals("etas");
    g.betas = r.counts("betas");
    g.token_budgets = r.counts("token_budgets");
    if (r.has("seeds")) {
      g.seeds = r.counts("seeds");
    } else {
      g.seeds = {cfg.train ? cfg.train->train.seed : 0};
    }
    g.schedule_kind = parse_schedule_kind(r.text("schedule_kind", "wsd"));
    g.decay_fraction = r.real("decay_fraction", sweep::kDefaultDecayFraction);
    sw.top_k = r.count("top_k", sweep::kDefaultTopK);
    sw.warmup_tokens = r.opt_count("warmup_tokens");
    if (r.has("models")) {
      const auto& arr = r.array("models");
      for (std::size_t i = 0; i < arr.size(); ++i) {
        SectionReader mr(arr[i], "sweep.models[" + std::to_string(i) + "]");
        sweep::ModelSize ms;
        ms.label = mr.text("label", "");
        ms.config = detail::read_model(mr);
        mr.finish();
        g.model_sizes.push_back(std::move(ms));
      }
    } else {
      require(cfg.model.has_value(), "sweep needs either sweep.models or a model section");
      g.model_sizes.push_back({"default", *cfg.model});
    }
    r.finish();
    require(sw.top_k >= 1, "sweep.top_k must be >= 1");
    g.validate();
    cfg.sweep = sw;
  }

  root.finish();
  return cfg;
}

inline ToolConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const Json::parse_error& e) {
    throw ValidationError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(doc);
}

/// MupConfig for training: the mup section, or a width-1 default shaped like
/// the model.
inline MupConfig resolve_mup(const ToolConfig& cfg, const toy::ModelConfig& model) {
  if (cfg.mup) return *cfg.mup;
  MupConfig m;
  m.d_model = model.d_model;
  m.d_base = model.d_model;
  m.d_head = model.d_head;
  return m;
}

/// Full TrainConfig for a single run (`train` command).
inline toy::TrainConfig resolve_train(const ToolConfig& cfg) {
  detail::require(cfg.train.has_value(), "config needs a train section");
  detail::require(cfg.model.has_value(), "config needs a model section");
  detail::require(cfg.schedule.has_value(), "config needs a schedule section");
  toy::TrainConfig t = cfg.train->train;
  t.schedule = *cfg.schedule;
  t.mup = resolve_mup(cfg, *cfg.model);
  t.validate(*cfg.model);
  return t;
}

}  // namespace powerlr
