// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Command implementations behind the `powerlr` executable. Each returns the
// process exit code: 0 success, 1 runtime or I/O failure, 2 invalid input.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "powerlr/config.hpp"
#include "powerlr/mup.hpp"
#include "powerlr/powerlaw_fit.hpp"
#include "powerlr/schedule.hpp"
#include "powerlr/sweep.hpp"
#include "powerlr/toy/checkpoint.hpp"
#include "powerlr/toy/corpus.hpp"
#include "powerlr/toy/sweep_trainer.hpp"
#include "powerlr/toy/trainer.hpp"

namespace powerlr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitInvalid = 2;

struct Io {
  std::ostream& out = std::cout;
  std::ostream& err = std::cerr;
};

template <class F>
int guarded(Io io, F&& body) {
  try {
    return body();
  } catch (const std::logic_error& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

/// Flags arrive as doubles so 1e13 works; counts must still be integral.
inline std::uint64_t to_count(double v, const std::string& flag) {
  if (!(v >= 0.0) || v != std::floor(v) || v >= 1.8e19) {
    throw ValidationError(flag + " must be a non-negative integer");
  }
  return static_cast<std::uint64_t>(v);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path + "'");
  return os;
}

inline void check_written(const std::ostream& os, const std::string& path) {
  if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

// --------------------------------------------------------------------------

inline int cmd_schedule_emit(const std::string& config, double start, double end, double stride,
                             const std::string& out_path, Io io = {}) {
  return guarded(io, [&] {
    const ToolConfig cfg = load_config(config);
    detail::require(cfg.schedule.has_value(), "config has no schedule section");
    const auto curve = emit_curve(*cfg.schedule, to_count(start, "--start"),
                                  to_count(end, "--end"), to_count(stride, "--stride"));
    std::ostream& info = out_path.empty() ? io.err : io.out;
    if (out_path.empty()) {
      write_curve_csv(io.out, curve);
    } else {
      auto os = open_output(out_path);
      write_curve_csv(os, curve);
      check_written(os, out_path);
      info << "wrote " << curve.size() << " samples to " << out_path << '\n';
    }
    if (cfg.schedule->kind == ScheduleKind::power) {
      const double n = clamp_crossover(*cfg.schedule);
      if (n > 0.0) {
        info << "clamp crossover: LR stays at eta_max until " << fmt("%.6g", n) << " tokens\n";
      } else {
        info << "clamp crossover: none (eta_max never binds)\n";
      }
    }
    return kExitOk;
  });
}

inline int cmd_predict_lr(double a, double b, double batch, double tokens, Io io = {}) {
  return guarded(io, [&] {
    const double lr = predict_opt_lr(a, b, to_count(batch, "--batch-size"),
                                     to_count(tokens, "--tokens"));
    io.out << fmt("%#.4g", lr) << '\n';
    return kExitOk;
  });
}

inline int cmd_mup_derive(const std::string& config, const std::string& csv_path, Io io = {}) {
  return guarded(io, [&] {
    const ToolConfig cfg = load_config(config);
    detail::require(cfg.mup.has_value(), "config has no mup section");
    const ParamPlan plan = derive_plan(*cfg.mup);
    write_plan_table(io.out, *cfg.mup, plan);
    if (!csv_path.empty()) {
      if (csv_path == "-") {
        write_plan_csv(io.out, plan);
      } else {
        auto os = open_output(csv_path);
        write_plan_csv(os, plan);
        check_written(os, csv_path);
      }
    }
    return kExitOk;
  });
}

inline int cmd_fit(const std::string& in_path, const std::string& out_path, Io io = {}) {
  return guarded(io, [&] {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open '" + in_path + "'");
    const auto points = read_points_csv(in);
    const FitResult r = fit_power_law(points);
    io.out << describe(r) << '\n';
    if (out_path.empty()) {
      write_fit_csv(io.out, r);
    } else {
      auto os = open_output(out_path);
      write_fit_csv(os, r);
      check_written(os, out_path);
    }
    return kExitOk;
  });
}

inline int cmd_sweep_run(const std::string& config, std::size_t parallelism,
                         const std::string& store_path, Io io = {}) {
  return guarded(io, [&] {
    const ToolConfig cfg = load_config(config);
    detail::require(cfg.sweep.has_value(), "config has no sweep section");
    detail::require(cfg.train.has_value() && !cfg.train->corpus.empty(),
                    "sweep needs train.corpus");
    const auto& grid = cfg.sweep->grid;

    toy::TrainConfig base = cfg.train->train;
    if (cfg.schedule) base.schedule = *cfg.schedule;
    if (cfg.sweep->warmup_tokens) base.schedule.warmup_tokens = *cfg.sweep->warmup_tokens;
    base.mup = resolve_mup(cfg, grid.model_sizes.front().config);

    // Validate every cell before touching the corpus or the store.
    const toy::Corpus empty_corpus;
    toy::SweepTrainer dry(empty_corpus, base, cfg.sweep_decay(grid.schedule_kind));
    for (const auto& r : sweep::plan_runs(grid)) dry.validate(r);

    const toy::Corpus corpus = toy::load_corpus(cfg.train->corpus, cfg.train->train_fraction);
    io.err << "corpus " << cfg.train->corpus << ": " << corpus.train.size() << " train / "
           << corpus.holdout.size() << " holdout bytes, fnv1a64 " << corpus.hash_hex() << '\n';
    toy::SweepTrainer trainer(corpus, base, cfg.sweep_decay(grid.schedule_kind));
    sweep::RecordStore store(store_path);
    const std::size_t before = store.records().size();
    const auto records = sweep::execute(grid, trainer, parallelism, store);
    std::size_t done = 0, failed = 0;
    for (const auto& r : records) (r.status == sweep::RunStatus::done ? done : failed) += 1;
    io.out << records.size() << " planned runs: " << done << " done, " << failed << " failed, "
           << store.records().size() - before << " newly executed\n";
    return kExitOk;
  });
}

inline int cmd_sweep_analyze(const std::string& store_path, const std::string& out_path,
                             const std::string& cells_path, std::size_t top_k, Io io = {}) {
  return guarded(io, [&] {
    const auto records = sweep::read_records(store_path);
    const sweep::Analysis a = sweep::analyze(records, top_k);
    for (const auto& w : a.warnings) io.err << "warning: " << w << '\n';
    io.out << describe(a.fit) << '\n';
    if (out_path.empty()) {
      sweep::write_analysis_csv(io.out, a);
    } else {
      auto os = open_output(out_path);
      sweep::write_analysis_csv(os, a);
      check_written(os, out_path);
    }
    if (!cells_path.empty()) {
      auto os = open_output(cells_path);
      sweep::write_cells_csv(os, a);
      check_written(os, cells_path);
    }
    return kExitOk;
  });
}

inline int cmd_train(const std::string& config, const std::string& history_path,
                     const std::string& checkpoint_path, Io io = {}) {
  return guarded(io, [&] {
    const ToolConfig cfg = load_config(config);
    const toy::TrainConfig tcfg = resolve_train(cfg);
    detail::require(!cfg.train->corpus.empty(), "train.corpus is required");
    const toy::Corpus corpus = toy::load_corpus(cfg.train->corpus, cfg.train->train_fraction);
    io.err << "corpus fnv1a64 " << corpus.hash_hex() << '\n';

    toy::TrainResult r;
    toy::Checkpoint ck{*cfg.model, 0, {}};
    auto run = [&]<class Real>(Real) {
      auto state = toy::init_model<Real>(*cfg.model, toy::scaling_for(tcfg), tcfg.seed);
      r = toy::train(state, corpus, tcfg);
      ck.tokens_seen = state.tokens_seen;
      ck.params = state.params.template cast<double>();
    };
    if (tcfg.precision == toy::Precision::float32) {
      run(0.0f);
    } else {
      run(0.0);
    }
    io.out << "steps " << r.steps << ", tokens " << r.tokens_seen << ", final train loss "
           << fmt("%.6f", r.final_train_loss) << ", eval loss " << fmt("%.6f", r.eval_loss)
           << ", eval ppl " << fmt("%.6f", r.eval_ppl) << '\n';
    if (!history_path.empty()) {
      auto os = open_output(history_path);
      toy::write_history_csv(os, r.history);
      check_written(os, history_path);
    }
    if (!checkpoint_path.empty()) {
      toy::save_checkpoint(checkpoint_path, ck);
    }
    return kExitOk;
  });
}

}  // namespace powerlr::cli
