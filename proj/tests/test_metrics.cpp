#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hades/hades.hpp"
#include "reference.hpp"

using namespace hades;

namespace {

EvaluatedPool pool_of(const std::vector<std::tuple<std::vector<int>, double, int>>& rows) {
  EvaluatedPool pool;
  for (const auto& [idx, f, r] : rows) pool.add(Sequence(idx), {f, 0.0, r});
  return pool;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hades_metrics_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST(CumulativeMax, Examples) {
  EXPECT_EQ(cumulative_max(pool_of({{{0}, 0.4, 1}}), 1), 0.4);
  auto pool = pool_of({{{0}, 0.4, 1}, {{1}, 0.9, 2}});
  EXPECT_EQ(cumulative_max(pool, 1), 0.4);
  EXPECT_EQ(cumulative_max(pool, 2), 0.9);
  EXPECT_THROW(cumulative_max(EvaluatedPool{}, 1), Error);
}

TEST(CumulativeMax, MatchesBruteForceAndIsMonotone) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    EvaluatedPool pool;
    std::vector<std::pair<int, double>> rows;
    while (pool.size() < 30) {
      auto s = reference::random_sequence(3, 20, rng);
      if (pool.contains(s)) continue;
      int round = 1 + static_cast<int>(uniform_index(rng, 5));
      double f = uniform01(rng);
      pool.add(s, {f, 0.0, round});
      rows.emplace_back(round, f);
    }
    double prev = -1.0;
    for (int r = 1; r <= 5; ++r) {
      double brute = -std::numeric_limits<double>::infinity();
      for (auto [round, f] : rows)
        if (round <= r) brute = std::max(brute, f);
      double got = cumulative_max(pool, r);
      EXPECT_EQ(got, brute);
      EXPECT_GE(got, prev);
      prev = got;
    }
  }
}

TEST(MeanTopK, Examples) {
  auto pool = pool_of({{{0}, 0.2, 1}, {{1}, 0.4, 1}, {{2}, 0.6, 1}});
  EXPECT_NEAR(mean_fitness_topk(pool, 2), 0.5, 1e-15);
  EXPECT_NEAR(mean_fitness_topk(pool, 3), 0.4, 1e-15);
  EXPECT_THROW(mean_fitness_topk(pool, 4), Error);
  EXPECT_THROW(mean_fitness_topk(pool, 0), Error);
  auto flat = pool_of({{{0}, 0.7, 1}, {{1}, 0.7, 1}, {{2}, 0.7, 2}});
  EXPECT_DOUBLE_EQ(mean_fitness_topk(flat, 2), 0.7);
  EXPECT_NEAR(mean_fitness_all(pool), 0.4, 1e-15);
}

TEST(TopK, TiesBrokenByString) {
  Alphabet a;
  EvaluatedPool pool(a);
  pool.add(parse_sequence("CA", a), {0.5, 0.0, 1});
  pool.add(parse_sequence("AC", a), {0.5, 0.0, 1});
  pool.add(parse_sequence("DD", a), {0.1, 0.0, 1});
  auto top = top_k(pool, 2);
  EXPECT_EQ(to_string(top[0].first, a), "AC");
  EXPECT_EQ(to_string(top[1].first, a), "CA");
  EXPECT_EQ(to_string(pool.best().first, a), "AC");
}

TEST(Fdiv, Examples) {
  EXPECT_DOUBLE_EQ(fdiv({{Sequence({0, 1}), 0.5}, {Sequence({0, 2}), 0.5}}), 0.5);
  EXPECT_EQ(fdiv({{Sequence({0, 1}), 0.3}, {Sequence({0, 1}), 0.9}}), 0.0);
  EXPECT_THROW(fdiv({{Sequence({0}), 1.0}}), Error);
  EXPECT_THROW(fdiv({}), Error);
}

TEST(Fdiv, MatchesBruteForce) {
  Rng rng(12);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n = 2 + uniform_index(rng, 6);
    std::vector<std::pair<Sequence, double>> d;
    for (std::size_t i = 0; i < n; ++i) d.emplace_back(reference::random_sequence(4, 3, rng), uniform01(rng));
    EXPECT_NEAR(fdiv(d), reference::fdiv_brute(d), 1e-12);
  }
}

TEST(Fdiv, PermutationInvariantScalesLinearlyAndNonNegative) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::pair<Sequence, double>> d;
    for (int i = 0; i < 6; ++i) d.emplace_back(reference::random_sequence(4, 5, rng), uniform01(rng));
    double base = fdiv(d);
    EXPECT_GE(base, 0.0);
    auto shuffled = d;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_NEAR(fdiv(shuffled), base, 1e-12);
    auto scaled = d;
    for (auto& [s, f] : scaled) f *= 3.0;
    EXPECT_NEAR(fdiv(scaled), 3.0 * base, 1e-12);
  }
}

TEST(Aggregate, PopulationStd) {
  MetricsSummary a, b;
  a.cumulative_max_fitness = 1.0;
  b.cumulative_max_fitness = 0.5;
  a.per_round_max = {0.2, 1.0};
  b.per_round_max = {0.4, 0.5};
  auto agg = aggregate({a, b});
  EXPECT_DOUBLE_EQ(agg.cumulative_max_fitness, 0.75);
  EXPECT_DOUBLE_EQ(agg.cumulative_max_std, 0.25);
  EXPECT_EQ(agg.seeds, 2u);
  ASSERT_EQ(agg.per_round_max.size(), 2u);
  EXPECT_DOUBLE_EQ(agg.per_round_max[0], 0.3);
}

TEST(Report, SummaryMatchesRecordsAndRoundCount) {
  auto pool = pool_of({{{0, 0}, 0.1, 1}, {{0, 1}, 0.3, 1}, {{1, 1}, 0.8, 2}, {{2, 1}, 0.5, 3}});
  std::vector<RoundRecord> records;
  for (int r = 1; r <= 3; ++r) {
    RoundRecord rec;
    rec.round_index = r;
    rec.cumulative_max = cumulative_max(pool, r);
    records.push_back(rec);
  }
  auto s = summarize_run(pool, records, 2);
  EXPECT_EQ(s.cumulative_max_fitness, s.per_round_max.back());
  EXPECT_EQ(s.cumulative_max_fitness, 0.8);
  EXPECT_DOUBLE_EQ(s.mean_fitness, 0.65);
  auto dir = scratch("report");
  write_report(records, s, dir, 7, {{"rounds", "3"}}, "AA");
  std::ifstream in(dir / "rounds.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["round"], ++lines);
  }
  EXPECT_EQ(lines, 3);
  auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(summary["master_seed"], 7);
  EXPECT_EQ(summary["config"]["rounds"], "3");
  EXPECT_EQ(summary["per_round_max"].size(), 3u);
  EXPECT_EQ(summary["metrics"]["cumulative_max_fitness"], 0.8);
  std::filesystem::remove_all(dir);
  EXPECT_THROW(write_report({}, s, dir, 7, {}, "AA"), Error);
}

TEST(Report, IdenticalSeedsGiveByteIdenticalReports) {
  TaskDefinition task;
  task.wild_type = Sequence({0, 0});
  NkLandscape land(2, 20, 1, 3);
  RunConfig cfg;
  cfg.rounds = 3;
  cfg.queries_per_round = 6;
  cfg.ensemble_size = 2;
  cfg.hmc.chains = 8;
  cfg.model.hidden_width = 16;
  cfg.master_seed = 5;
  std::string bodies[2];
  for (int i = 0; i < 2; ++i) {
    auto r = run_experiment(task, land, cfg);
    auto s = summarize_run(r.pool, r.records, 6);
    auto dir = scratch("det" + std::to_string(i));
    write_report(r.records, s, dir, cfg.master_seed, {}, to_string(r.pool.best().first, task.alphabet));
    std::string rounds = slurp(dir / "rounds.jsonl");
    EXPECT_EQ(std::count(rounds.begin(), rounds.end(), '\n'), 3);
    bodies[i] = rounds + slurp(dir / "summary.json");
    std::filesystem::remove_all(dir);
  }
  EXPECT_EQ(bodies[0], bodies[1]);
}
