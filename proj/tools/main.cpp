// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  using namespace powerlr::cli;

  CLI::App app{"Learning-rate schedules, muP plans, LR sweeps and power-law fits"};
  app.require_subcommand(1);
  int code = kExitOk;

  // schedule emit
  auto* schedule = app.add_subcommand("schedule", "Learning-rate schedules");
  schedule->require_subcommand(1);
  auto* emit = schedule->add_subcommand("emit", "Write the LR curve as tokens,lr CSV");
  std::string sched_config, sched_out;
  double start = 0, end = 0, stride = 1;
  emit->add_option("--config", sched_config, "JSON config with a schedule section")->required();
  emit->add_option("--start", start, "First token count");
  emit->add_option("--end", end, "Last token count")->required();
  emit->add_option("--stride", stride, "Token spacing between samples");
  emit->add_option("--out", sched_out, "Output CSV (default stdout)");
  emit->callback([&] { code = cmd_schedule_emit(sched_config, start, end, stride, sched_out); });

  // predict-lr
  auto* predict = app.add_subcommand("predict-lr", "Predict the optimal LR from a fitted law");
  double a = 0, b = 0, batch = 0, tokens = 0;
  predict->add_option("--a", a, "Fitted coefficient")->required();
  predict->add_option("--b", b, "Fitted exponent")->required();
  predict->add_option("--batch-size", batch, "Batch size in sequences")->required();
  predict->add_option("--tokens", tokens, "Training tokens")->required();
  predict->callback([&] { code = cmd_predict_lr(a, b, batch, tokens); });

  // mup derive
  auto* mup = app.add_subcommand("mup", "muP parameter-group plans");
  mup->require_subcommand(1);
  auto* derive = mup->add_subcommand("derive", "Print per-group LR, init std and multipliers");
  std::string mup_config, mup_csv;
  derive->add_option("--config", mup_config, "JSON config with a mup section")->required();
  derive->add_option("--csv", mup_csv, "Also write CSV here ('-' for stdout)");
  derive->callback([&] { code = cmd_mup_derive(mup_config, mup_csv); });

  // fit
  auto* fit = app.add_subcommand("fit", "Fit gamma = a * T^b to tokens,gamma points");
  std::string fit_in, fit_out;
  fit->add_option("--in", fit_in, "Input CSV with header tokens,gamma")->required();
  fit->add_option("--out", fit_out, "Output CSV (default stdout)");
  fit->callback([&] { code = cmd_fit(fit_in, fit_out); });

  // sweep run / analyze
  auto* sweep = app.add_subcommand("sweep", "LR sweeps on the toy transformer");
  sweep->require_subcommand(1);
  auto* run = sweep->add_subcommand("run", "Execute (or resume) a sweep grid");
  std::string run_config, run_store;
  std::size_t parallelism = 1;
  run->add_option("--config", run_config, "JSON config with train and sweep sections")->required();
  run->add_option("--store", run_store, "JSONL record store")->required();
  run->add_option("--parallelism", parallelism, "Concurrent run families")
      ->check(CLI::PositiveNumber);
  run->callback([&] { code = cmd_sweep_run(run_config, parallelism, run_store); });

  auto* analyze = sweep->add_subcommand("analyze", "Select optima and fit the power law");
  std::string an_store, an_out, an_cells;
  std::size_t top_k = 3;
  analyze->add_option("--store", an_store, "JSONL record store")->required();
  analyze->add_option("--out", an_out, "Per-budget CSV plus fit row (default stdout)");
  analyze->add_option("--cells-out", an_cells, "Per-cell optimum CSV");
  analyze->add_option("--top-k", top_k, "Batch sizes kept per budget")->check(CLI::PositiveNumber);
  analyze->callback([&] { code = cmd_sweep_analyze(an_store, an_out, an_cells, top_k); });

  // train
  auto* train = app.add_subcommand("train", "Train the toy transformer once");
  std::string train_config, history, checkpoint;
  train->add_option("--config", train_config, "JSON config with model and train sections")
      ->required();
  train->add_option("--out-history", history, "tokens,loss CSV");
  train->add_option("--out-checkpoint", checkpoint, "Binary checkpoint");
  train->callback([&] { code = cmd_train(train_config, history, checkpoint); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInvalid;
  }
  return code;
}
