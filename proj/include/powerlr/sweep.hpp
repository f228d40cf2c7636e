// Copyright (c) 2026 The powerlr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Grid searches over (learning rate, batch size, token budget, model size,
// seed), persisted one JSON object per line, and the selection protocol that
// turns them into a gamma = a * T^b fit:
//   1. per (batch, T, size) cell, eta_opt = argmin holdout perplexity
//   2. per (T, size), keep the top_k batch sizes by their optimal perplexity
//   3. gamma = eta_opt / batch, averaged over the kept batch sizes
//   4. per T, average over sizes; fit the per-T averages

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "powerlr/error.hpp"
#include "powerlr/hash.hpp"
#include "powerlr/powerlaw_fit.hpp"
#include "powerlr/schedule.hpp"
#include "powerlr/toy/model.hpp"

namespace powerlr::sweep {

inline constexpr std::size_t kDefaultTopK = 3;
inline constexpr double kDefaultDecayFraction = 0.1;

struct ModelSize {
  std::string label;
  toy::ModelConfig config;
};

struct SweepGrid {
  std::vector<double> etas;
  std::vector<std::uint64_t> betas;
  std::vector<Tokens> token_budgets;
  std::vector<ModelSize> model_sizes;
  std::vector<std::uint64_t> seeds{0};
  ScheduleKind schedule_kind = ScheduleKind::wsd;
  double decay_fraction = kDefaultDecayFraction;

  void validate() const {
    using powerlr::detail::require;
    require(!etas.empty() && !betas.empty() && !token_budgets.empty() && !model_sizes.empty() &&
                !seeds.empty(),
            "sweep: every grid axis needs at least one value");
    require(std::adjacent_find(etas.begin(), etas.end(), std::greater_equal<>{}) == etas.end(),
            "sweep.etas must be strictly increasing");
    require(std::adjacent_find(betas.begin(), betas.end(), std::greater_equal<>{}) == betas.end(),
            "sweep.betas must be strictly increasing");
    for (double e : etas) require(std::isfinite(e) && e > 0.0, "sweep.etas must be > 0");
    for (auto b : betas) require(b >= 1, "sweep.betas must be >= 1");
    for (auto t : token_budgets) require(t >= 1, "sweep.token_budgets must be >= 1");
    require(schedule_kind != ScheduleKind::constant,
            "sweep.schedule_kind must be one of wsd, power, cosine");
    require(decay_fraction > 0.0 && decay_fraction < 1.0,
            "sweep.decay_fraction must lie in (0, 1)");
    std::set<std::string> labels;
    for (const auto& m : model_sizes) {
      require(!m.label.empty(), "sweep: model size labels must be non-empty");
      require(labels.insert(m.label).second, "sweep: duplicate model size label '" + m.label + "'");
      m.config.validate();
    }
  }
};

/// One grid cell: everything that distinguishes a run inside a sweep.
struct RunConfig {
  double eta = 0.0;
  std::uint64_t beta = 1;
  Tokens tokens = 1;
  ModelSize model;
  std::uint64_t seed = 0;
  ScheduleKind schedule_kind = ScheduleKind::wsd;
  double decay_fraction = kDefaultDecayFraction;
  std::string run_id;

  /// Tokens spent in the final decay, rounded to the nearest token.
  Tokens decay_tokens() const {
    return static_cast<Tokens>(std::llround(decay_fraction * static_cast<double>(tokens)));
  }
};

/// Stable identifier: FNV-1a over a canonical rendering of the run's fields.
inline std::string run_id_of(const RunConfig& r) {
  const auto& m = r.model.config;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "eta=%.17g;beta=%llu;tokens=%llu;model=%s:%llu,%llu,%llu,%llu,%llu,%llu,%llu;"
                "seed=%llu;kind=%s;decay_fraction=%.17g",
                r.eta, static_cast<unsigned long long>(r.beta),
                static_cast<unsigned long long>(r.tokens), r.model.label.c_str(),
                static_cast<unsigned long long>(m.n_layers),
                static_cast<unsigned long long>(m.d_model),
                static_cast<unsigned long long>(m.n_heads),
                static_cast<unsigned long long>(m.d_head),
                static_cast<unsigned long long>(m.mlp_hidden),
                static_cast<unsigned long long>(m.vocab_size),
                static_cast<unsigned long long>(m.sequence_length),
                static_cast<unsigned long long>(r.seed),
                std::string(to_string(r.schedule_kind)).c_str(), r.decay_fraction);
  return to_hex(Fnv1a64{}.update(std::string_view(buf)).digest());
}

/// Cartesian product in axis order (eta, beta, tokens, size, seed), last axis fastest.
inline std::vector<RunConfig> plan_runs(const SweepGrid& g) {
  g.validate();
  std::vector<RunConfig> out;
  out.reserve(g.etas.size() * g.betas.size() * g.token_budgets.size() * g.model_sizes.size() *
              g.seeds.size());
  for (double eta : g.etas) {
    for (auto beta : g.betas) {
      for (auto t : g.token_budgets) {
        for (const auto& m : g.model_sizes) {
          for (auto seed : g.seeds) {
            RunConfig r{eta, beta, t, m, seed, g.schedule_kind, g.decay_fraction, {}};
            r.run_id = run_id_of(r);
            out.push_back(std::move(r));
          }
        }
      }
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Records.

enum class RunStatus { done, failed };

inline std::string_view to_string(RunStatus s) { return s == RunStatus::done ? "done" : "failed"; }

struct RunRecord {
  std::string run_id;
  double eta = 0.0;
  std::uint64_t beta = 0;
  Tokens tokens = 0;
  std::string model_size;
  std::uint64_t seed = 0;
  double final_train_loss = 0.0;
  double eval_ppl = 0.0;
  double wall_seconds = 0.0;
  RunStatus status = RunStatus::failed;
  std::string reason;  // empty for done runs

  bool usable() const { return status == RunStatus::done && std::isfinite(eval_ppl); }
};

namespace detail {

// JSON has no NaN/Inf; non-finite values are written as null and read back as NaN.
inline nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

inline double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const RunRecord& r) {
  nlohmann::ordered_json j;
  j["run_id"] = r.run_id;
  j["eta"] = r.eta;
  j["beta"] = r.beta;
  j["tokens"] = r.tokens;
  j["model_size"] = r.model_size;
  j["seed"] = r.seed;
  j["final_train_loss"] = detail::finite_or_null(r.final_train_loss);
  j["eval_ppl"] = detail::finite_or_null(r.eval_ppl);
  j["wall_seconds"] = r.wall_seconds;
  j["status"] = std::string(to_string(r.status));
  j["reason"] = r.reason;
  return j;
}

inline RunRecord record_from_json(const nlohmann::json& j) {
  RunRecord r;
  r.run_id = j.at("run_id").get<std::string>();
  r.eta = j.at("eta").get<double>();
  r.beta = j.at("beta").get<std::uint64_t>();
  r.tokens = j.at("tokens").get<Tokens>();
  r.model_size = j.at("model_size").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.final_train_loss = detail::number_or_nan(j.at("final_train_loss"));
  r.eval_ppl = detail::number_or_nan(j.at("eval_ppl"));
  r.wall_seconds = j.at("wall_seconds").get<double>();
  const auto status = j.at("status").get<std::string>();
  if (status != "done" && status != "failed") {
    throw std::runtime_error("record store: unknown status '" + status + "'");
  }
  r.status = status == "done" ? RunStatus::done : RunStatus::failed;
  r.reason = j.value("reason", std::string{});
  return r;
}

/// Append-only JSON-lines store. Opening a store drops a torn final line left
/// by a crash mid-write, so it can always be resumed.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path path) : path_(std::move(path)) {
    repair_and_load();
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw StoreWriteError("cannot open record store '" + path_.string() + "'");
  }

  const std::filesystem::path& path() const { return path_; }

  std::vector<RunRecord> records() const {
    std::lock_guard lock(mu_);
    return records_;
  }

  bool contains(const std::string& run_id) const {
    std::lock_guard lock(mu_);
    return ids_.contains(run_id);
  }

  /// Thread-safe; each record is flushed before returning.
  void append(const RunRecord& r) {
    std::lock_guard lock(mu_);
    const std::string line = to_json(r).dump() + "\n";
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.flush();
    if (!out_) throw StoreWriteError("failed appending to record store '" + path_.string() + "'");
    records_.push_back(r);
    ids_.insert(r.run_id);
  }

 private:
  void repair_and_load() {
    std::error_code ec;
    if (!std::filesystem::exists(path_, ec)) return;
    std::ifstream in(path_, std::ios::binary);
    if (!in) throw StoreWriteError("cannot read record store '" + path_.string() + "'");
    const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    const auto last_nl = content.rfind('\n');
    const std::size_t complete = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (complete != content.size()) {
      std::filesystem::resize_file(path_, complete, ec);
      if (ec) throw StoreWriteError("cannot truncate torn record in '" + path_.string() + "'");
    }
    std::size_t start = 0, lineno = 0;
    while (start < complete) {
      const auto nl = content.find('\n', start);
      const std::string line = content.substr(start, nl - start);
      start = nl + 1;
      ++lineno;
      if (line.empty()) continue;
      try {
        RunRecord r = record_from_json(nlohmann::json::parse(line));
        ids_.insert(r.run_id);
        records_.push_back(std::move(r));
      } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("record store '" + path_.string() + "' line " +
                                 std::to_string(lineno) + " is corrupt: " + e.what());
      }
    }
  }

  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::vector<RunRecord> records_;
  std::unordered_set<std::string> ids_;
  std::ofstream out_;
};

/// Read-only snapshot of a store, for analysis.
inline std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open record store '" + path.string() + "'");
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception&) {
      // A torn final line is what a crash mid-append leaves behind.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw std::runtime_error("record store '" + path.string() + "' line " +
                               std::to_string(lineno) + " is corrupt");
    }
  }
  return out;
}

// --------------------------------------------------------------------------
// Execution.

struct Outcome {
  RunStatus status = RunStatus::failed;
  double final_train_loss = std::numeric_limits<double>::quiet_NaN();
  double eval_ppl = std::numeric_limits<double>::quiet_NaN();
  double wall_seconds = 0.0;
  std::string reason;
};

using OutcomeCallback = std::function<void(std::size_t, Outcome)>;

/// Something that can train sweep runs. A family is a set of runs that share
/// every field except the token budget; implementations may exploit that.
/// Must be callable from several threads at once.
class Trainer {
 public:
  virtual ~Trainer() = default;
  /// Rejects a run the trainer cannot execute (throws ValidationError).
  virtual void validate(const RunConfig&) const {}
  /// Reports each member exactly once via on_done(index_in_family, outcome).
  virtual void run_family(std::span<const RunConfig> family, const OutcomeCallback& on_done) = 0;
};

/// Adapts a per-run function; runs family members independently.
class FunctionTrainer final : public Trainer {
 public:
  using Fn = std::function<Outcome(const RunConfig&)>;
  explicit FunctionTrainer(Fn fn) : fn_(std::move(fn)) {}
  void run_family(std::span<const RunConfig> family, const OutcomeCallback& on_done) override {
    for (std::size_t i = 0; i < family.size(); ++i) on_done(i, fn_(family[i]));
  }

 private:
  Fn fn_;
};

inline RunRecord make_record(const RunConfig& r, const Outcome& o) {
  RunRecord rec;
  rec.run_id = r.run_id;
  rec.eta = r.eta;
  rec.beta = r.beta;
  rec.tokens = r.tokens;
  rec.model_size = r.model.label;
  rec.seed = r.seed;
  rec.final_train_loss = o.final_train_loss;
  rec.eval_ppl = o.eval_ppl;
  rec.wall_seconds = o.wall_seconds;
  rec.status = o.status;
  rec.reason = o.reason;
  if (rec.status == RunStatus::done && !(std::isfinite(rec.eval_ppl) && rec.eval_ppl > 1.0)) {
    rec.status = RunStatus::failed;
    rec.reason = "non-finite or invalid eval perplexity";
  }
  if (rec.status == RunStatus::failed && rec.reason.empty()) rec.reason = "failed";
  return rec;
}

/// Groups runs into families: same everything except token budget, in plan order.
inline std::vector<std::vector<RunConfig>> group_families(std::span<const RunConfig> runs) {
  std::vector<std::vector<RunConfig>> families;
  std::map<std::tuple<double, std::uint64_t, std::string, std::uint64_t>, std::size_t> where;
  for (const auto& r : runs) {
    const auto key = std::make_tuple(r.eta, r.beta, r.model.label, r.seed);
    auto [it, fresh] = where.try_emplace(key, families.size());
    if (fresh) families.emplace_back();
    families[it->second].push_back(r);
  }
  return families;
}

/// Runs every planned run not yet in `store`, up to `parallelism` families at
/// a time, appending one record per run. Run failures become failed records;
/// a store write failure stops the sweep and is rethrown as StoreWriteError.
/// Returns the records of all planned runs, in plan order.
inline std::vector<RunRecord> execute(const SweepGrid& grid, Trainer& trainer,
                                      std::size_t parallelism, RecordStore& store) {
  powerlr::detail::require(parallelism >= 1, "parallelism must be >= 1");
  const auto planned = plan_runs(grid);
  for (const auto& r : planned) trainer.validate(r);

  std::vector<RunConfig> pending;
  for (const auto& r : planned) {
    if (!store.contains(r.run_id)) pending.push_back(r);
  }
  const auto families = group_families(pending);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};
  std::exception_ptr store_error;
  std::mutex err_mu;

  auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t f = next.fetch_add(1);
      if (f >= families.size()) return;
      const auto& fam = families[f];
      std::vector<bool> reported(fam.size(), false);
      try {
        trainer.run_family(fam, [&](std::size_t i, Outcome o) {
          store.append(make_record(fam[i], o));
          reported[i] = true;
        });
        for (std::size_t i = 0; i < fam.size(); ++i) {
          if (!reported[i]) {
            Outcome o;
            o.reason = "trainer did not report this run";
            store.append(make_record(fam[i], o));
          }
        }
      } catch (const StoreWriteError&) {
        std::lock_guard lock(err_mu);
        if (!store_error) store_error = std::current_exception();
        abort = true;
        return;
      } catch (const std::exception& e) {
        try {
          for (std::size_t i = 0; i < fam.size(); ++i) {
            if (reported[i]) continue;
            Outcome o;
            o.reason = e.what();
            store.append(make_record(fam[i], o));
          }
        } catch (const StoreWriteError&) {
          std::lock_guard lock(err_mu);
          if (!store_error) store_error = std::current_exception();
          abort = true;
          return;
        }
      }
    }
  };

  const std::size_t n_threads = std::min(parallelism, std::max<std::size_t>(families.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  }
  if (store_error) std::rethrow_exception(store_error);

  std::map<std::string, RunRecord> by_id;
  for (auto& r : store.records()) by_id.insert_or_assign(r.run_id, r);
  std::vector<RunRecord> out;
  out.reserve(planned.size());
  for (const auto& r : planned) out.push_back(by_id.at(r.run_id));
  return out;
}

// --------------------------------------------------------------------------
// Analysis.

struct Optimum {
  double eta = 0.0;
  double eval_ppl = 0.0;
  bool grid_edge = false;  // eta is the smallest or largest eta tried in the cell
  std::size_t n_etas = 0;
};

/// argmin over eta of holdout perplexity for one (beta, tokens, size) cell,
/// averaging over seeds. Ties go to the smaller eta. Failed runs are ignored.
inline Optimum select_optimal(std::span<const RunRecord> records, std::uint64_t beta,
                              Tokens tokens, const std::string& model_size) {
  std::map<double, std::pair<double, std::size_t>> by_eta;  // eta -> (sum ppl, count)
  for (const auto& r : records) {
    if (!r.usable() || r.beta != beta || r.tokens != tokens || r.model_size != model_size) continue;
    auto& slot = by_eta[r.eta];
    slot.first += r.eval_ppl;
    slot.second += 1;
  }
  if (by_eta.empty()) {
    throw ValidationError("select_optimal: no completed runs for beta=" + std::to_string(beta) +
                          ", tokens=" + std::to_string(tokens) + ", size='" + model_size + "'");
  }
  Optimum best;
  best.eval_ppl = std::numeric_limits<double>::infinity();
  for (const auto& [eta, acc] : by_eta) {  // ascending eta, so strict < keeps the smaller on ties
    const double ppl = acc.first / static_cast<double>(acc.second);
    if (ppl < best.eval_ppl) {
      best.eta = eta;
      best.eval_ppl = ppl;
    }
  }
  best.n_etas = by_eta.size();
  best.grid_edge = best.eta == by_eta.begin()->first || best.eta == by_eta.rbegin()->first;
  return best;
}

struct CellOptimum {
  Tokens tokens = 0;
  std::string model_size;
  std::uint64_t beta = 0;
  Optimum optimum;
  bool kept = false;  // among the top_k batch sizes for (tokens, size)
};

struct TokenRow {
  Tokens tokens = 0;
  double avg_gamma = 0.0;
  std::size_t n_batch_sizes_used = 0;  // smallest kept count over model sizes
  bool flagged = false;                // fewer than top_k batch sizes, or a kept grid-edge optimum
};

struct Analysis {
  std::vector<CellOptimum> cells;  // sorted by (tokens, size, beta)
  std::vector<TokenRow> rows;      // sorted by tokens
  FitResult fit;
  std::vector<std::string> warnings;
};

/// Pure function of the record set (order-insensitive); failed runs never count.
inline Analysis analyze(std::span<const RunRecord> records, std::size_t top_k = kDefaultTopK) {
  powerlr::detail::require(top_k >= 1, "analyze: top_k must be >= 1");
  std::map<std::pair<Tokens, std::string>, std::set<std::uint64_t>> cells;
  for (const auto& r : records) {
    if (r.usable()) cells[{r.tokens, r.model_size}].insert(r.beta);
  }

  Analysis a;
  std::map<Tokens, std::vector<std::pair<double, std::size_t>>> per_t;  // (avg gamma, kept)
  std::map<Tokens, bool> flagged;
  for (const auto& [key, betas] : cells) {
    const auto& [tokens, size] = key;
    std::vector<CellOptimum> group;
    for (auto beta : betas) {
      group.push_back({tokens, size, beta, select_optimal(records, beta, tokens, size), false});
    }
    std::vector<std::size_t> rank(group.size());
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](std::size_t x, std::size_t y) {
      return group[x].optimum.eval_ppl < group[y].optimum.eval_ppl;  // betas ascend: ties -> smaller
    });
    const std::size_t kept = std::min(top_k, group.size());
    double gamma_sum = 0.0;
    bool flag = kept < top_k;
    if (kept < top_k) {
      a.warnings.push_back("tokens=" + std::to_string(tokens) + " size='" + size + "': only " +
                           std::to_string(kept) + " batch sizes available (wanted " +
                           std::to_string(top_k) + ")");
    }
    for (std::size_t i = 0; i < kept; ++i) {
      auto& c = group[rank[i]];
      c.kept = true;
      gamma_sum += gamma_of(c.optimum.eta, c.beta);
      if (c.optimum.grid_edge) flag = true;
    }
    for (const auto& c : group) {
      if (c.optimum.grid_edge) {
        char buf[200];
        std::snprintf(buf, sizeof buf,
                      "grid-edge optimum: tokens=%llu size='%s' beta=%llu eta_opt=%g%s",
                      static_cast<unsigned long long>(tokens), size.c_str(),
                      static_cast<unsigned long long>(c.beta), c.optimum.eta,
                      c.kept ? "" : " (not in top-k)");
        a.warnings.emplace_back(buf);
      }
    }
    per_t[tokens].push_back({gamma_sum / static_cast<double>(kept), kept});
    flagged[tokens] = flagged[tokens] || flag;
    a.cells.insert(a.cells.end(), group.begin(), group.end());
  }

  std::vector<SweepPoint> points;
  for (const auto& [tokens, entries] : per_t) {
    TokenRow row;
    row.tokens = tokens;
    row.n_batch_sizes_used = std::numeric_limits<std::size_t>::max();
    double sum = 0.0;
    for (const auto& [g, kept] : entries) {
      sum += g;
      row.n_batch_sizes_used = std::min(row.n_batch_sizes_used, kept);
    }
    row.avg_gamma = sum / static_cast<double>(entries.size());
    row.flagged = flagged[tokens];
    a.rows.push_back(row);
    points.push_back({tokens, row.avg_gamma});
  }
  a.fit = fit_power_law(points);
  return a;
}

inline void write_analysis_csv(std::ostream& os, const Analysis& a) {
  os << "tokens,avg_gamma,n_batch_sizes_used,flagged\n";
  char buf[160];
  for (const auto& r : a.rows) {
    std::snprintf(buf, sizeof buf, "%llu,%.10g,%zu,%d\n", static_cast<unsigned long long>(r.tokens),
                  r.avg_gamma, r.n_batch_sizes_used, r.flagged ? 1 : 0);
    os << buf;
  }
  os << '\n';
  write_fit_csv(os, a.fit);
}

inline void write_cells_csv(std::ostream& os, const Analysis& a) {
  os << "tokens,model_size,beta,eta_opt,eval_ppl,gamma,kept,grid_edge\n";
  char buf[256];
  for (const auto& c : a.cells) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%llu,%.10g,%.10g,%.10g,%d,%d\n",
                  static_cast<unsigned long long>(c.tokens), c.model_size.c_str(),
                  static_cast<unsigned long long>(c.beta), c.optimum.eta, c.optimum.eval_ppl,
                  c.optimum.eta / static_cast<double>(c.beta), c.kept ? 1 : 0,
                  c.optimum.grid_edge ? 1 : 0);
    os << buf;
  }
}

}  // namespace powerlr::sweep
