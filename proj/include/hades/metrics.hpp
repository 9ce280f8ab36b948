#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hades/pool.hpp"
#include "hades/seq_core.hpp"

namespace hades {

using ScoredSequence = std::pair<Sequence, double>;

inline double cumulative_max(const EvaluatedPool& pool, int upto_round) {
  if (pool.empty()) throw Error("cumulative_max: empty pool");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [seq, e] : pool.entries())
    if (e.round_acquired <= upto_round) best = std::max(best, e.fitness);
  return best;
}

/// Pool entries sorted by fitness descending, ties by sequence string ascending.
inline std::vector<ScoredSequence> ranked_entries(const EvaluatedPool& pool) {
  std::vector<std::pair<std::string, ScoredSequence>> rows;
  rows.reserve(pool.size());
  for (const auto& [seq, e] : pool.entries()) rows.push_back({to_string(seq, pool.alphabet()), {seq, e.fitness}});
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.second.second != b.second.second) return a.second.second > b.second.second;
    return a.first < b.first;
  });
  std::vector<ScoredSequence> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(r.second));
  return out;
}

inline std::vector<ScoredSequence> top_k(const EvaluatedPool& pool, std::size_t k) {
  auto ranked = ranked_entries(pool);
  if (ranked.size() > k) ranked.resize(k);
  return ranked;
}

inline double mean_fitness_topk(const EvaluatedPool& pool, std::size_t k) {
  if (k == 0) throw Error("mean_fitness_topk: K must be >= 1");
  if (pool.size() < k) throw Error("mean_fitness_topk: pool smaller than K");
  double acc = 0.0;
  for (const auto& [seq, y] : top_k(pool, k)) acc += y;
  return acc / static_cast<double>(k);
}

inline double mean_fitness_all(const EvaluatedPool& pool) {
  if (pool.empty()) throw Error("mean_fitness_all: empty pool");
  double acc = 0.0;
  for (const auto& [seq, e] : pool.entries()) acc += e.fitness;
  return acc / static_cast<double>(pool.size());
}

/// Fitness-conditioned diversity: sum over ordered pairs i != j of
/// d(x_i, x_j) * (F_i + F_j), divided by 2 |D| (|D| - 1).
inline double fdiv(const std::vector<ScoredSequence>& top) {
  const std::size_t n = top.size();
  if (n < 2) throw Error("fdiv: need at least two sequences");
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      acc += 2.0 * static_cast<double>(edit_distance(top[i].first, top[j].first)) * (top[i].second + top[j].second);
  return acc / (2.0 * static_cast<double>(n) * static_cast<double>(n - 1));
}

struct MetricsSummary {
  double cumulative_max_fitness = 0.0;
  double mean_fitness = 0.0;
  double mean_fitness_all = 0.0;
  double fdiv = 0.0;
  std::vector<double> per_round_max;
  std::size_t seeds = 1;
  double cumulative_max_std = 0.0;
  double mean_fitness_std = 0.0;
  double mean_fitness_all_std = 0.0;
  double fdiv_std = 0.0;
};

inline MetricsSummary summarize_run(const EvaluatedPool& pool, const std::vector<RoundRecord>& records, std::size_t k) {
  if (records.empty()) throw Error("summarize_run: no rounds");
  MetricsSummary s;
  for (const auto& r : records) s.per_round_max.push_back(r.cumulative_max);
  s.cumulative_max_fitness = s.per_round_max.back();
  std::size_t kk = std::min(k, pool.size());
  s.mean_fitness = mean_fitness_topk(pool, kk);
  s.mean_fitness_all = mean_fitness_all(pool);
  s.fdiv = kk >= 2 ? fdiv(top_k(pool, kk)) : 0.0;
  return s;
}

/// Mean and population standard deviation across seeds.
inline std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : xs) m += x;
  m /= static_cast<double>(xs.size());
  double v = 0.0;
  for (double x : xs) v += (x - m) * (x - m);
  return {m, std::sqrt(v / static_cast<double>(xs.size()))};
}

inline MetricsSummary aggregate(const std::vector<MetricsSummary>& runs) {
  if (runs.empty()) throw Error("aggregate: no runs");
  MetricsSummary out;
  out.seeds = runs.size();
  auto field = [&](auto member) {
    std::vector<double> xs;
    for (const auto& r : runs) xs.push_back(r.*member);
    return mean_std(xs);
  };
  std::tie(out.cumulative_max_fitness, out.cumulative_max_std) = field(&MetricsSummary::cumulative_max_fitness);
  std::tie(out.mean_fitness, out.mean_fitness_std) = field(&MetricsSummary::mean_fitness);
  std::tie(out.mean_fitness_all, out.mean_fitness_all_std) = field(&MetricsSummary::mean_fitness_all);
  std::tie(out.fdiv, out.fdiv_std) = field(&MetricsSummary::fdiv);
  std::size_t rounds = runs.front().per_round_max.size();
  for (std::size_t r = 0; r < rounds; ++r) {
    std::vector<double> xs;
    for (const auto& run : runs)
      if (r < run.per_round_max.size()) xs.push_back(run.per_round_max[r]);
    out.per_round_max.push_back(mean_std(xs).first);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports
//
// rounds.jsonl: one object per round with keys, in order:
//   round, queried_count, round_max, cumulative_max, mean_topk, acceptance_rate
// summary.json: schema, master_seed, config (key -> value), metrics, per_round_max,
//   best_sequence, notes. Field order is fixed.

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

inline nlohmann::ordered_json round_json(const RoundRecord& r) {
  nlohmann::ordered_json j;
  j["round"] = r.round_index;
  j["queried_count"] = r.queried.size();
  j["round_max"] = r.round_max;
  j["cumulative_max"] = r.cumulative_max;
  j["mean_topk"] = r.mean_topk;
  j["acceptance_rate"] = r.acceptance_rate;
  return j;
}

inline nlohmann::ordered_json metrics_json(const MetricsSummary& s) {
  nlohmann::ordered_json m;
  m["cumulative_max_fitness"] = s.cumulative_max_fitness;
  m["mean_fitness_topk"] = s.mean_fitness;
  m["mean_fitness_all"] = s.mean_fitness_all;
  m["fdiv"] = s.fdiv;
  if (s.seeds > 1) {
    m["seeds"] = s.seeds;
    m["cumulative_max_fitness_std"] = s.cumulative_max_std;
    m["mean_fitness_topk_std"] = s.mean_fitness_std;
    m["mean_fitness_all_std"] = s.mean_fitness_all_std;
    m["fdiv_std"] = s.fdiv_std;
  }
  return m;
}

inline nlohmann::ordered_json summary_json(const MetricsSummary& s, std::uint64_t master_seed, const ConfigEcho& config,
                                           const std::string& best_sequence) {
  nlohmann::ordered_json j;
  j["schema"] = "hades-summary/1";
  j["master_seed"] = master_seed;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  j["config"] = cfg;
  j["metrics"] = metrics_json(s);
  j["per_round_max"] = s.per_round_max;
  j["best_sequence"] = best_sequence;
  j["notes"] = {{"mean_fitness_topk", "mean ground-truth fitness of the top-K pool entries (headline)"},
                {"mean_fitness_all", "mean over every queried sequence (alternative reading)"}};
  return j;
}

inline void write_text(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << body;
  out.flush();
  if (!out) throw Error("write failed: " + path.string());
}

/// Writes `<stem>rounds.jsonl` and `<stem>summary.json` under `dir`.
inline void write_report(const std::vector<RoundRecord>& records, const MetricsSummary& summary,
                         const std::filesystem::path& dir, std::uint64_t master_seed, const ConfigEcho& config,
                         const std::string& best_sequence, const std::string& stem = "") {
  if (records.empty()) throw Error("write_report: no round records");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
  std::string log;
  for (const auto& r : records) log += round_json(r).dump() + "\n";
  write_text(dir / (stem + "rounds.jsonl"), log);
  write_text(dir / (stem + "summary.json"), summary_json(summary, master_seed, config, best_sequence).dump(2) + "\n");
}

}  // namespace hades
