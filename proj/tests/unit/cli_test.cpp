// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "support/synthetic_corpus.hpp"
#include "support/temp_dir.hpp"

namespace {

struct Result {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  Result run(const std::string& args) {
    const auto out = dir_.path() / "stdout.txt";
    const auto err = dir_.path() / "stderr.txt";
    const std::string cmd = std::string(POWERLR_BIN) + " " + args + " > " + out.string() +
                            " 2> " + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
  }

  std::string file(const std::string& name, const std::string& text) {
    const auto p = dir_.path() / name;
    std::ofstream(p) << text;
    return p.string();
  }

  static std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  std::string path(const std::string& name) const { return (dir_.path() / name).string(); }

  powerlr::testing::TempDir dir_;
};

TEST_F(Cli, PredictLr) {
  const Result r = run("predict-lr --a 4.6 --b -0.51 --batch-size 1024 --tokens 1e13");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "0.001104\n");
}

TEST_F(Cli, PredictLrRejectsBadInput) {
  EXPECT_EQ(run("predict-lr --a 4.6 --b -0.51 --batch-size 1024 --tokens 0").code, 2);
  EXPECT_EQ(run("predict-lr --a 4.6 --b -0.51 --batch-size 10.5 --tokens 1e9").code, 2);
  EXPECT_EQ(run("predict-lr --a 4.6 --b -0.51 --batch-size 1024").code, 2);
  EXPECT_EQ(run("no-such-command").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST_F(Cli, ScheduleEmit) {
  const auto cfg = file("s.json", R"({"schedule": {"kind": "wsd", "peak_lr": 0.01,
      "warmup_tokens": 10, "decay_tokens": 20, "total_tokens": 100}})");
  const Result r = run("schedule emit --config " + cfg + " --end 100 --stride 50");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "tokens,lr\n0,0\n50,0.01\n100,0\n");

  const auto power = file("p.json", R"({"schedule": {"kind": "power", "batch_size": 1024}})");
  const Result p = run("schedule emit --config " + power + " --start 1e9 --end 2e9 --stride 1e9 --out " +
                    path("p.csv"));
  EXPECT_EQ(p.code, 0) << p.err;
  EXPECT_NE(p.out.find("clamp crossover"), std::string::npos);
  EXPECT_EQ(slurp(path("p.csv")).substr(0, 10), "tokens,lr\n");
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  const auto bad = file("bad.json", R"({"schedule": {"kind": "wsd", "peak_lr": 0.01, "bogus": 1}})");
  const Result r = run("schedule emit --config " + bad + " --end 10");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  EXPECT_EQ(run("schedule emit --config " + path("missing.json") + " --end 10").code, 1);
}

TEST_F(Cli, MupDerive) {
  const auto cfg = file("m.json", R"({"mup": {"d_model": 512, "d_base": 256, "d_head": 64,
      "base_lr": 0.0016, "init_std": 0.02}})");
  const Result r = run("mup derive --config " + cfg + " --csv -");
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("internal_matrix,0.0008,0.01414213562,1"), std::string::npos);
}

TEST_F(Cli, Fit) {
  const auto in = file("pts.csv", "tokens,gamma\n100,1\n10000,0.1\n");
  const Result r = run("fit --in " + in);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("a,b,rmse_log,n_points\n10,-0.5,"), std::string::npos);
  EXPECT_EQ(run("fit --in " + file("one.csv", "tokens,gamma\n1000,0.1\n")).code, 2);
  EXPECT_EQ(run("fit --in " + path("nope.csv")).code, 1);
}

TEST_F(Cli, TrainAndSweep) {
  powerlr::testing::write_synthetic_corpus(path("corpus.txt"), 40'000);
  const std::string model =
      R"("model": {"n_layers": 1, "d_model": 16, "n_heads": 2, "d_head": 8, "mlp_hidden": 32,
                   "sequence_length": 16},)";
  const auto train_cfg = file("t.json", "{" + model + R"(
      "schedule": {"kind": "wsd", "peak_lr": 0.01, "warmup_tokens": 256, "decay_tokens": 1024},
      "train": {"corpus": ")" + path("corpus.txt") + R"(", "batch_size": 4, "total_tokens": 8192,
                "train_fraction": 0.9, "eval_tokens": 1024, "history_interval_tokens": 1024}})");
  const Result t = run("train --config " + train_cfg + " --out-history " + path("h.csv") +
                    " --out-checkpoint " + path("m.ckpt"));
  EXPECT_EQ(t.code, 0) << t.err;
  EXPECT_NE(t.out.find("steps 128"), std::string::npos) << t.out;
  EXPECT_EQ(slurp(path("h.csv")).substr(0, 17), "tokens,loss\n1024,");
  EXPECT_TRUE(std::filesystem::exists(path("m.ckpt")));

  const auto sweep_cfg = file("w.json", "{" + model + R"(
      "train": {"corpus": ")" + path("corpus.txt") + R"(", "train_fraction": 0.9,
                "eval_tokens": 1024},
      "sweep": {"etas": [0.005, 0.01, 0.02], "betas": [4], "token_budgets": [4096, 8192]}})");
  const Result s = run("sweep run --config " + sweep_cfg + " --store " + path("s.jsonl"));
  EXPECT_EQ(s.code, 0) << s.err;
  EXPECT_EQ(s.out, "6 planned runs: 6 done, 0 failed, 6 newly executed\n");
  const Result again = run("sweep run --config " + sweep_cfg + " --store " + path("s.jsonl"));
  EXPECT_EQ(again.out, "6 planned runs: 6 done, 0 failed, 0 newly executed\n");

  const Result a = run("sweep analyze --store " + path("s.jsonl") + " --cells-out " + path("c.csv"));
  EXPECT_EQ(a.code, 0) << a.err;
  EXPECT_NE(a.out.find("a,b,rmse_log,n_points"), std::string::npos) << a.out;
  EXPECT_EQ(run("sweep analyze --store " + path("empty.jsonl")).code, 1);
}

}  // namespace
