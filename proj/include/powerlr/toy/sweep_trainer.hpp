// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Runs sweep cells on the toy transformer.

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "powerlr/sweep.hpp"
#include "powerlr/toy/corpus.hpp"
#include "powerlr/toy/trainer.hpp"

namespace powerlr::toy {

class SweepTrainer final : public sweep::Trainer {
 public:
  /// `base` supplies optimizer, muP, warmup, power (a, b) and evaluation
  /// settings; each run overrides batch size, budget, seed and its LR.
  SweepTrainer(const Corpus& corpus, TrainConfig base, DecaySpec decay)
      : corpus_(corpus), base_(std::move(base)), decay_(decay) {}

  /// For wsd/cosine the run's eta is the peak LR; for power it is eta_max.
  TrainConfig make_train_config(const sweep::RunConfig& r) const {
    TrainConfig t = base_;
    t.batch_size = r.beta;
    t.total_tokens = r.tokens;
    t.seed = r.seed;
    t.mup.d_model = r.model.config.d_model;
    t.mup.d_head = r.model.config.d_head;

    ScheduleSpec& s = t.schedule;
    s.kind = r.schedule_kind;
    s.total_tokens = r.tokens;
    s.batch_size = r.beta;
    s.decay = decay_;
    s.decay_tokens = r.schedule_kind == ScheduleKind::cosine ? 0 : r.decay_tokens();
    if (r.schedule_kind == ScheduleKind::power) {
      s.eta_max = r.eta;
    } else {
      s.peak_lr = r.eta;
    }
    return t;
  }

  void validate(const sweep::RunConfig& r) const override {
    make_train_config(r).validate(r.model.config);
  }

  void run_family(std::span<const sweep::RunConfig> family,
                  const sweep::OutcomeCallback& on_done) override {
    if (family.empty()) return;
    std::vector<TrainConfig> cfgs;
    cfgs.reserve(family.size());
    for (const auto& r : family) cfgs.push_back(make_train_config(r));
    train_family(family.front().model.config, cfgs, corpus_, [&](std::size_t i, RunOutcome o) {
      sweep::Outcome out;
      out.status = o.ok ? sweep::RunStatus::done : sweep::RunStatus::failed;
      out.reason = o.reason;
      out.wall_seconds = o.wall_seconds;
      if (o.ok) {
        out.final_train_loss = o.result.final_train_loss;
        out.eval_ppl = o.result.eval_ppl;
      }
      on_done(i, std::move(out));
    });
  }

 private:
  const Corpus& corpus_;
  TrainConfig base_;
  DecaySpec decay_;
};

}  // namespace powerlr::toy
