#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hades/acquisition.hpp"
#include "hades/config.hpp"
#include "hades/hmc.hpp"
#include "hades/metrics.hpp"
#include "hades/parallel.hpp"

namespace hades {

struct SeedRun {
  std::uint64_t seed = 0;
  MetricsSummary summary;
  std::size_t oracle_calls = 0;
  std::string best_sequence;
};

/// One optimization run written to `dir`: rounds.jsonl (appended as rounds
/// finish), summary.json, and the final ensemble checkpoints.
inline SeedRun run_one_seed(const CliConfig& cfg, const TaskDefinition& task, const Landscape& land,
                            std::uint64_t seed, const std::filesystem::path& dir, int jobs) {
  RunConfig run = cfg.run;
  run.master_seed = seed;
  run.jobs = jobs;
  std::filesystem::create_directories(dir);
  std::ofstream live(dir / "rounds.jsonl", std::ios::binary | std::ios::trunc);
  if (!live) throw Error("cannot open " + (dir / "rounds.jsonl").string());
  RunResult result = run_experiment(task, land, run, [&](const RoundRecord& r) {
    live << round_json(r).dump() << '\n';
    live.flush();
  });
  live.close();

  SeedRun out;
  out.seed = seed;
  out.summary = summarize_run(result.pool, result.records, static_cast<std::size_t>(run.queries_per_round));
  out.oracle_calls = result.oracle_calls;
  out.best_sequence = to_string(result.pool.best().first, task.alphabet);
  write_report(result.records, out.summary, dir, seed, config_echo(cfg), out.best_sequence);
  for (std::size_t i = 0; i < result.ensemble.members.size(); ++i) {
    std::ofstream ck(dir / ("member_" + std::to_string(i) + ".ckpt"), std::ios::binary | std::ios::trunc);
    result.ensemble.members[i].save(ck);
  }
  return out;
}

inline std::vector<SeedRun> run_seeds(const CliConfig& cfg, const TaskDefinition& task, const Landscape& land,
                                      const std::filesystem::path& out_dir) {
  std::vector<SeedRun> runs(cfg.seeds.size());
  const bool fan_out = cfg.seeds.size() > 1;
  parallel_for(cfg.seeds.size(), fan_out ? cfg.run.jobs : 1, [&](std::size_t i) {
    std::uint64_t seed = cfg.seeds[i];
    auto dir = fan_out ? out_dir / ("seed_" + std::to_string(seed)) : out_dir;
    runs[i] = run_one_seed(cfg, task, land, seed, dir, fan_out ? 1 : cfg.run.jobs);
  });
  return runs;
}

inline int cmd_run(const CliConfig& cfg, std::ostream& log) {
  validate_config(cfg);
  TaskDefinition task = make_task(cfg);
  auto land = make_landscape(cfg, task);
  std::filesystem::path out(cfg.out_dir);
  auto runs = run_seeds(cfg, task, *land, out);
  std::vector<MetricsSummary> summaries;
  for (const auto& r : runs) {
    summaries.push_back(r.summary);
    log << "seed " << r.seed << ": cumulative_max=" << r.summary.cumulative_max_fitness
        << " mean_topk=" << r.summary.mean_fitness << " fdiv=" << r.summary.fdiv << " oracle_calls=" << r.oracle_calls
        << " best=" << r.best_sequence << '\n';
  }
  if (runs.size() > 1) {
    MetricsSummary agg = aggregate(summaries);
    nlohmann::ordered_json j;
    j["schema"] = "hades-aggregate/1";
    j["seeds"] = cfg.seeds;
    nlohmann::ordered_json c = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config_echo(cfg)) c[k] = v;
    j["config"] = c;
    j["metrics"] = metrics_json(agg);
    j["per_round_max_mean"] = agg.per_round_max;
    write_text(out / "aggregate_summary.json", j.dump(2) + "\n");
    log << "aggregate over " << runs.size() << " seeds: cumulative_max=" << agg.cumulative_max_fitness << " +- "
        << agg.cumulative_max_std << '\n';
  }
  return 0;
}

struct BenchCell {
  std::string method;
  int k = 0;
  MetricsSummary summary;
};

/// HADES against the random-mutation baseline over the K grid and seed list.
inline std::vector<BenchCell> run_bench(const CliConfig& cfg) {
  validate_config(cfg);
  if (cfg.k_grid.empty()) throw Error("bench.k_grid is empty");
  TaskDefinition task = make_task(cfg);
  auto land = make_landscape(cfg, task);
  const std::vector<std::pair<std::string, ProposalMode>> methods{{"hades", ProposalMode::hmc},
                                                                   {"random", ProposalMode::random}};
  struct Job {
    std::size_t cell;
    std::uint64_t seed;
  };
  std::vector<BenchCell> cells;
  std::vector<Job> jobs;
  for (int k : cfg.k_grid) {
    for (const auto& m : methods) {
      cells.push_back({m.first, k, {}});
      for (auto s : cfg.seeds) jobs.push_back({cells.size() - 1, s});
    }
  }
  std::vector<MetricsSummary> results(jobs.size());
  parallel_for(jobs.size(), cfg.run.jobs, [&](std::size_t j) {
    const BenchCell& cell = cells[jobs[j].cell];
    RunConfig run = cfg.run;
    run.queries_per_round = cell.k;
    run.proposals = cell.method == "hades" ? ProposalMode::hmc : ProposalMode::random;
    run.master_seed = jobs[j].seed;
    run.jobs = 1;
    RunResult r = run_experiment(task, *land, run);
    results[j] = summarize_run(r.pool, r.records, static_cast<std::size_t>(cell.k));
  });
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<MetricsSummary> mine;
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (jobs[j].cell == c) mine.push_back(results[j]);
    cells[c].summary = aggregate(mine);
  }
  return cells;
}

inline std::string bench_table(const std::vector<BenchCell>& cells) {
  std::ostringstream os;
  os << "method\tK\tseeds\tcum_max_mean\tcum_max_std\tmean_topk_mean\tmean_topk_std\tfdiv_mean\tfdiv_std\n";
  os << std::setprecision(6);
  for (const auto& c : cells) {
    const auto& s = c.summary;
    os << c.method << '\t' << c.k << '\t' << s.seeds << '\t' << s.cumulative_max_fitness << '\t'
       << s.cumulative_max_std << '\t' << s.mean_fitness << '\t' << s.mean_fitness_std << '\t' << s.fdiv << '\t'
       << s.fdiv_std << '\n';
  }
  return os.str();
}

inline int cmd_bench(const CliConfig& cfg, std::ostream& log) {
  auto cells = run_bench(cfg);
  std::string table = bench_table(cells);
  std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  write_text(out / "bench.tsv", table);
  log << table;
  return 0;
}

inline nlohmann::ordered_json trace_json(const TraceStep& s, const Alphabet& alphabet) {
  nlohmann::ordered_json j;
  j["t"] = s.t;
  j["U_before"] = s.potential_before;
  j["K_before"] = s.kinetic_before;
  j["H_before"] = s.h_before();
  j["U_after"] = s.potential_after;
  j["K_after"] = s.kinetic_after;
  j["H_after"] = s.h_after();
  j["accepted"] = s.accepted;
  j["barrier_overflow"] = s.barrier_overflow;
  j["sequence"] = to_string(s.proposal, alphabet);
  return j;
}

/// One chain from `start`, printing one JSON line per leapfrog step. Without a
/// checkpoint a fresh model is initialized from the first seed.
inline int cmd_sample(const CliConfig& cfg, const std::string& start, const std::string& checkpoint,
                      std::ostream& out) {
  cfg.run.hmc.validate();
  Alphabet alphabet(cfg.alphabet);
  Sequence seq = parse_sequence(start, alphabet);
  SurrogateModel model;
  if (!checkpoint.empty()) {
    std::ifstream in(checkpoint);
    if (!in) throw Error("cannot open checkpoint " + checkpoint);
    model = SurrogateModel::load(in);
  } else {
    ArchitectureConfig arch{seq.size(), alphabet.size(), cfg.run.model.hidden_width, cfg.run.model.encoder_depth};
    model = SurrogateModel::initialize(arch, cfg.seeds.empty() ? 0 : cfg.seeds.front());
  }
  const auto& arch = model.architecture();
  if (arch.sites != seq.size() || arch.symbols != alphabet.size())
    throw Error("checkpoint shape does not match the sequence and alphabet");
  Rng rng = make_stream({cfg.seeds.empty() ? 0 : cfg.seeds.front(), 0x5a4dull});
  ChainResult chain = hmc_chain(seq, alphabet.size(), SurrogatePotential{model}, cfg.run.hmc, rng, true);
  for (const auto& step : chain.trace) out << trace_json(step, alphabet).dump() << '\n';
  return 0;
}

}  // namespace hades
