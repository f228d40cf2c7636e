// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Training loop for the toy transformer: muP-aware initialization, AdamW with
// per-group learning rates, token-indexed schedule stepping, holdout
// evaluation, and the finite-difference / coordinate-check diagnostics.
//
// Conventions:
//   - every step consumes batch_size * sequence_length tokens
//   - the schedule is evaluated at tokens_seen *before* the step, so the first
//     step sees n = 0
//   - steps = floor(total_tokens / tokens_per_step)
//   - model math runs in float or double (TrainConfig::precision); the
//     schedule, losses and evaluation are always double

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "powerlr/error.hpp"
#include "powerlr/mup.hpp"
#include "powerlr/schedule.hpp"
#include "powerlr/toy/corpus.hpp"
#include "powerlr/toy/model.hpp"

namespace powerlr::toy {

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.95;
  double eps = 1e-8;
  double weight_decay = 0.1;  // decoupled, matrices only

  void validate() const {
    using powerlr::detail::require;
    require(beta1 >= 0.0 && beta1 < 1.0, "train.beta1 must lie in [0, 1)");
    require(beta2 >= 0.0 && beta2 < 1.0, "train.beta2 must lie in [0, 1)");
    require(eps > 0.0, "train.eps must be > 0");
    require(weight_decay >= 0.0, "train.weight_decay must be >= 0");
  }
};

struct TrainConfig {
  std::uint64_t batch_size = 8;  // sequences per step
  Tokens total_tokens = 1'000'000;
  ScheduleSpec schedule;
  MupConfig mup;
  bool use_mup = true;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  Tokens eval_tokens = 10'000;
  Tokens history_interval_tokens = 0;  // 0 records every step
  Precision precision = Precision::float32;

  Tokens tokens_per_step(const ModelConfig& m) const { return batch_size * m.sequence_length; }
  std::uint64_t total_steps(const ModelConfig& m) const {
    return total_tokens / tokens_per_step(m);
  }

  void validate(const ModelConfig& m) const {
    using powerlr::detail::require;
    m.validate();
    require(batch_size >= 1, "train.batch_size must be >= 1");
    require(total_tokens >= tokens_per_step(m),
            "train.total_tokens must cover at least one step of batch_size * sequence_length");
    require(eval_tokens >= m.sequence_length, "train.eval_tokens must be >= sequence_length");
    schedule.validate();
    if (schedule.kind == ScheduleKind::power) {
      require(schedule.batch_size == batch_size,
              "schedule.batch_size must equal train.batch_size for the power schedule");
    }
    if (schedule.total_tokens) {
      require(*schedule.total_tokens == total_tokens,
              "schedule.total_tokens must equal train.total_tokens");
    }
    mup.validate();
    optimizer.validate();
  }
};

inline ModelScaling scaling_for(const TrainConfig& cfg) {
  return cfg.use_mup ? mup_scaling(cfg.mup) : standard_scaling(cfg.mup);
}

template <class Real>
struct BasicTrainState {
  using Scalar = Real;
  ModelConfig config;
  ModelScaling scaling;
  BasicParams<Real> params;
  BasicParams<Real> adam_m;
  BasicParams<Real> adam_v;
  Tokens tokens_seen = 0;
  std::uint64_t steps = 0;
  Rng data_rng;
};

using TrainState = BasicTrainState<double>;

struct HistoryPoint {
  Tokens tokens = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<HistoryPoint> history;
  double final_train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_ppl = 0.0;
  Tokens tokens_seen = 0;
  std::uint64_t steps = 0;
};

/// Gaussian init per the scaling plan: embeddings and head at their group
/// std, internal matrices at the internal std; norm gains 1, head bias 0.
/// Draws are made in double, so both precisions start from the same weights
/// up to rounding.
template <class Real = double>
BasicTrainState<Real> init_model(const ModelConfig& mcfg, const ModelScaling& scaling,
                                 std::uint64_t seed) {
  mcfg.validate();
  powerlr::detail::require(scaling.d_model == mcfg.d_model && scaling.d_head == mcfg.d_head,
                  "init_model: parametrization was derived for d_model=" +
                      std::to_string(scaling.d_model) + ", d_head=" +
                      std::to_string(scaling.d_head) + " but the model has d_model=" +
                      std::to_string(mcfg.d_model) + ", d_head=" + std::to_string(mcfg.d_head));
  BasicTrainState<Real> st;
  st.config = mcfg;
  st.scaling = scaling;
  st.params = make_param_shapes<Real>(mcfg);
  Rng rng(seed);
  for (auto& t : st.params.tensors) {
    if (t.group == ParamGroup::vector_params) {
      if (t.name.ends_with("norm")) t.value.setOnes();
      continue;
    }
    const double std_dev = plan_for(scaling.plan, t.group).init_std;
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = static_cast<Real>(std_dev * normal(rng));
  }
  st.adam_m = st.params.zeros_like();
  st.adam_v = st.params.zeros_like();
  st.data_rng.seed(seed ^ 0x9e3779b97f4a7c15ULL);
  return st;
}

/// One AdamW update with the group-scaled learning rates.
template <class Real>
void adamw_update(BasicTrainState<Real>& st, const BasicParams<Real>& grad, double base_lr,
                  const OptimizerConfig& opt) {
  const double t = static_cast<double>(st.steps + 1);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t i = 0; i < st.params.size(); ++i) {
    auto& p = st.params[i];
    const auto lr = static_cast<Real>(st.scaling.group_lr(p.group, base_lr));
    const auto wd = static_cast<Real>(p.is_matrix() ? opt.weight_decay : 0.0);
    const auto b1 = static_cast<Real>(opt.beta1);
    const auto b2 = static_cast<Real>(opt.beta2);
    auto pa = p.value.array();
    auto ma = st.adam_m[i].value.array();
    auto va = st.adam_v[i].value.array();
    const auto ga = grad[i].value.array();
    ma = b1 * ma + (Real(1) - b1) * ga;
    va = b2 * va + (Real(1) - b2) * ga.square();
    pa -= lr * ((ma / static_cast<Real>(bc1)) /
                    ((va / static_cast<Real>(bc2)).sqrt() + static_cast<Real>(opt.eps)) +
                wd * pa);
  }
}

/// Mean cross-entropy over up to `eval_tokens` tokens of consecutive holdout windows.
template <class Real>
double evaluate(const BasicTrainState<Real>& st, BasicTransformer<Real>& model,
                       std::span<const std::uint8_t> holdout, Tokens eval_tokens) {
  const std::size_t s = st.config.sequence_length;
  const std::size_t available = holdout.size() > 0 ? (holdout.size() - 1) / s : 0;
  const std::size_t windows = std::min<std::size_t>(available, eval_tokens / s);
  powerlr::detail::require(windows >= 1, "holdout stream of " + std::to_string(holdout.size()) +
                                    " bytes is too short for one evaluation window");
  constexpr std::size_t kChunk = 16;
  double total = 0.0;
  for (std::size_t w = 0; w < windows; w += kChunk) {
    const std::size_t n = std::min(kChunk, windows - w);
    const Batch b = contiguous_batch(holdout, w, n, s);
    total += model.loss(st.params, b) * static_cast<double>(n);
  }
  return total / static_cast<double>(windows);
}

namespace detail {

// Single-precision training hits denormals in the Adam second moments, which
// are slow on x86; flushing them does not change results measurably.
class FlushDenormals {
 public:
  FlushDenormals() {
#if defined(__SSE__)
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~FlushDenormals() {
#if defined(__SSE__)
    _mm_setcsr(saved_);
#endif
  }
  FlushDenormals(const FlushDenormals&) = delete;
  FlushDenormals& operator=(const FlushDenormals&) = delete;

 private:
  unsigned saved_ = 0;
};

// Advances `st` until it has taken `until_steps` steps. Throws DivergenceError
// on a non-finite loss or parameter.
template <class Real>
void run_steps(BasicTrainState<Real>& st, BasicTransformer<Real>& model, BasicParams<Real>& grad,
               const Corpus& data, const TrainConfig& cfg, std::uint64_t until_steps,
               std::vector<HistoryPoint>& history, double& last_loss) {
  [[maybe_unused]] std::optional<FlushDenormals> ftz;
  if constexpr (std::is_same_v<Real, float>) ftz.emplace();
  const std::size_t s = st.config.sequence_length;
  const Tokens per_step = cfg.tokens_per_step(st.config);
  const Tokens interval = cfg.history_interval_tokens;
  while (st.steps < until_steps) {
    const double base_lr = lr_at(cfg.schedule, st.tokens_seen);
    const Batch b = sample_batch(data.train, cfg.batch_size, s, st.data_rng);
    const double loss = model.loss_and_grad(st.params, b, grad);
    if (!std::isfinite(loss)) {
      throw DivergenceError("non-finite training loss at tokens_seen=" +
                            std::to_string(st.tokens_seen));
    }
    adamw_update(st, grad, base_lr, cfg.optimizer);
    if (!st.params.all_finite()) {
      throw DivergenceError("non-finite parameter after step at tokens_seen=" +
                            std::to_string(st.tokens_seen));
    }
    const Tokens before = st.tokens_seen;
    st.tokens_seen += per_step;
    ++st.steps;
    last_loss = loss;
    const bool last = st.steps == cfg.total_steps(st.config);
    if (interval == 0 || last || st.tokens_seen / interval != before / interval) {
      history.push_back({st.tokens_seen, loss});
    }
  }
}

template <class Real>
void finish(BasicTrainState<Real>& st, BasicTransformer<Real>& model, const Corpus& data,
            const TrainConfig& cfg, TrainResult& r) {
  r.eval_loss = evaluate(st, model, data.holdout, cfg.eval_tokens);
  r.eval_ppl = std::exp(r.eval_loss);
  r.tokens_seen = st.tokens_seen;
  r.steps = st.steps;
}

}  // namespace detail

/// Trains `state` to tcfg.total_tokens and evaluates on the holdout stream.
/// Throws DivergenceError when training blows up. The state's scalar type
/// decides the precision; tcfg.precision is ignored here.
template <class Real>
TrainResult train(BasicTrainState<Real>& state, const Corpus& data, const TrainConfig& tcfg) {
  tcfg.validate(state.config);
  BasicTransformer<Real> model(state.config, state.scaling);
  BasicParams<Real> grad = state.params.zeros_like();
  TrainResult r;
  detail::run_steps(state, model, grad, data, tcfg, tcfg.total_steps(state.config), r.history,
                    r.final_train_loss);
  detail::finish(state, model, data, tcfg, r);
  return r;
}

// --------------------------------------------------------------------------
// Shared-prefix training of run families.

struct RunOutcome {
  bool ok = false;
  std::string reason;  // set when !ok
  TrainResult result;
  double wall_seconds = 0.0;
};

/// Trains several configs that share model, seed and data order but differ in
/// schedule / token budget. Runs stay on one shared trajectory for as long as
/// their per-step learning rates agree bit-for-bit and branch off a copy of
/// the state at the first step where they differ, so every outcome is
/// identical to training that config alone. For WSD this shares everything
/// up to each run's decay start.
///
using OutcomeSink = std::function<void(std::size_t, RunOutcome)>;

namespace detail {

template <class Real>
void train_family_impl(const ModelConfig& mcfg, std::span<const TrainConfig> members,
                       const Corpus& data, const OutcomeSink& on_done) {
  using Clock = std::chrono::steady_clock;

  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return members[a].total_steps(mcfg) > members[b].total_steps(mcfg);
  });
  const std::size_t trunk_id = order.front();
  const TrainConfig& trunk = members[trunk_id];
  for (const auto& m : members) {
    powerlr::detail::require(
        m.seed == trunk.seed && m.batch_size == trunk.batch_size && m.use_mup == trunk.use_mup,
        "train_family: members must share seed, batch size and parametrization");
  }

  double trunk_wall = 0.0;  // time spent on the shared trajectory so far

  const ModelScaling scaling = scaling_for(trunk);
  BasicTrainState<Real> st = init_model<Real>(mcfg, scaling, trunk.seed);
  BasicTransformer<Real> model(mcfg, scaling);
  BasicParams<Real> grad = st.params.zeros_like();
  std::vector<HistoryPoint> history;
  double last_loss = 0.0;

  auto complete = [&](std::size_t id, BasicTrainState<Real>& s, std::vector<HistoryPoint> h, double loss,
                      double start_wall) {
    RunOutcome out;
    const auto tb = Clock::now();
    try {
      const TrainConfig& cfg = members[id];
      out.result.history = std::move(h);
      out.result.final_train_loss = loss;
      detail::run_steps(s, model, grad, data, cfg, cfg.total_steps(mcfg), out.result.history,
                        out.result.final_train_loss);
      detail::finish(s, model, data, cfg, out.result);
      out.ok = true;
    } catch (const DivergenceError& e) {
      out.ok = false;
      out.reason = e.what();
    }
    out.wall_seconds = start_wall + std::chrono::duration<double>(Clock::now() - tb).count();
    on_done(id, std::move(out));
  };

  std::vector<bool> done(members.size(), false);
  const std::uint64_t trunk_steps = trunk.total_steps(mcfg);
  try {
    for (;;) {
      for (std::size_t id : order) {
        if (id == trunk_id || done[id]) continue;
        const TrainConfig& m = members[id];
        const bool at_end = st.steps == m.total_steps(mcfg);
        if (at_end || lr_at(m.schedule, st.tokens_seen) != lr_at(trunk.schedule, st.tokens_seen)) {
          BasicTrainState<Real> branch = st;
          complete(id, branch, history, last_loss, trunk_wall);
          done[id] = true;
        }
      }
      if (st.steps == trunk_steps) break;
      const auto ts = Clock::now();
      detail::run_steps(st, model, grad, data, trunk, st.steps + 1, history, last_loss);
      trunk_wall += std::chrono::duration<double>(Clock::now() - ts).count();
    }
  } catch (const DivergenceError& e) {
    // Every member still on the shared trajectory would have hit the same step.
    for (std::size_t id : order) {
      if (done[id]) continue;
      RunOutcome out;
      out.reason = e.what();
      out.wall_seconds = trunk_wall;
      on_done(id, std::move(out));
      done[id] = true;
    }
    return;
  }
  complete(trunk_id, st, std::move(history), last_loss, trunk_wall);
}

}  // namespace detail

/// `on_done(i, outcome)` fires once per member, in completion order.
inline void train_family(const ModelConfig& mcfg, std::span<const TrainConfig> members,
                         const Corpus& data, const OutcomeSink& on_done) {
  if (members.empty()) return;
  for (const auto& m : members) {
    m.validate(mcfg);
    powerlr::detail::require(m.precision == members.front().precision,
                             "train_family: members must share precision");
  }
  if (members.front().precision == Precision::float32) {
    detail::train_family_impl<float>(mcfg, members, data, on_done);
  } else {
    detail::train_family_impl<double>(mcfg, members, data, on_done);
  }
}

// --------------------------------------------------------------------------
// Diagnostics.

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::array<double, 4> per_group{};  // indexed by ParamGroup
  std::size_t n_checked = 0;
};

/// Central finite differences on up to `samples_per_tensor` coordinates of
/// every tensor; error is |g - fd| / (|g| + |fd| + 1e-12).
template <class Real>
GradCheckResult grad_check(const BasicTrainState<Real>& st, const Batch& batch, double epsilon,
                           std::size_t samples_per_tensor = 64, std::uint64_t seed = 0) {
  BasicTransformer<Real> model(st.config, st.scaling);
  BasicParams<Real> grad = st.params.zeros_like();
  model.loss_and_grad(st.params, batch, grad);
  BasicParams<Real> probe = st.params;
  Rng rng(seed);
  GradCheckResult r;
  for (std::size_t ti = 0; ti < probe.size(); ++ti) {
    const auto n = static_cast<std::size_t>(probe[ti].value.size());
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), 0);
    if (n > samples_per_tensor) {
      for (std::size_t i = 0; i < samples_per_tensor; ++i) {
        std::swap(coords[i], coords[i + uniform_below(rng, n - i)]);
      }
      coords.resize(samples_per_tensor);
    }
    for (std::size_t c : coords) {
      Real& x = probe[ti].value.data()[c];
      const Real saved = x;
      x = saved + static_cast<Real>(epsilon);
      const double lp = model.loss(probe, batch);
      x = saved - static_cast<Real>(epsilon);
      const double lm = model.loss(probe, batch);
      x = saved;
      const double fd = (lp - lm) / (2.0 * epsilon);
      const auto an = static_cast<double>(grad[ti].value.data()[c]);
      const double err = std::abs(an - fd) / (std::abs(an) + std::abs(fd) + 1e-12);
      auto& slot = r.per_group[static_cast<std::size_t>(probe[ti].group)];
      slot = std::max(slot, err);
      r.max_rel_error = std::max(r.max_rel_error, err);
      ++r.n_checked;
    }
  }
  return r;
}

struct CoordCheckRow {
  std::uint64_t width = 0;
  double residual_rms = 0.0;
  std::vector<double> per_layer_rms;  // after embedding, then after each block
};

/// Residual-stream RMS at initialization for each (model, scaling) pair, on
/// one batch of `n_seqs` uniformly random token sequences.
inline std::vector<CoordCheckRow> coord_check(std::span<const ModelConfig> models,
                                              std::span<const ModelScaling> scalings,
                                              std::uint64_t seed, std::size_t n_seqs = 8) {
  powerlr::detail::require(models.size() == scalings.size(), "coord_check: one scaling per model");
  std::vector<CoordCheckRow> rows;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const TrainState st = init_model(models[i], scalings[i], seed);
    Transformer model(models[i], scalings[i]);
    Rng rng(seed + 1);
    Batch b;
    b.n_seqs = n_seqs;
    b.seq_len = models[i].sequence_length;
    b.inputs.resize(b.rows());
    b.targets.resize(b.rows());
    for (std::size_t j = 0; j < b.rows(); ++j) {
      b.inputs[j] = static_cast<std::uint16_t>(uniform_below(rng, models[i].vocab_size));
      b.targets[j] = static_cast<std::uint16_t>(uniform_below(rng, models[i].vocab_size));
    }
    model.loss(st.params, b);
    rows.push_back({models[i].d_model, model.final_residual_rms(), model.residual_rms()});
  }
  return rows;
}

inline void write_history_csv(std::ostream& os, std::span<const HistoryPoint> history) {
  os << "tokens,loss\n";
  char buf[64];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%.10g", h.loss);
    os << h.tokens << ',' << buf << '\n';
  }
}

}  // namespace powerlr::toy
