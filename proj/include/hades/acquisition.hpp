#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hades/hmc.hpp"
#include "hades/metrics.hpp"
#include "hades/oracles.hpp"
#include "hades/parallel.hpp"
#include "hades/pool.hpp"
#include "hades/rng.hpp"
#include "hades/seq_core.hpp"
#include "hades/surrogate.hpp"

namespace hades {

enum class ProposalMode { hmc, random };

struct ModelConfig {
  std::size_t hidden_width = 64;
  std::size_t encoder_depth = 2;
};

struct RunConfig {
  int rounds = 10;
  int queries_per_round = 100;
  HmcConfig hmc;
  TrainConfig train;
  ModelConfig model;
  int ensemble_size = 4;
  std::uint64_t master_seed = 0;
  int init_mutations = 2;
  int max_chain_restarts = 50;
  /// false skips stage 1 and trains the encoder jointly with the fitness head.
  bool use_structure = true;
  /// false ranks by a single model's prediction instead of the ensemble UCB.
  bool use_ucb = true;
  ProposalMode proposals = ProposalMode::hmc;
  /// Continue training from last round's parameters instead of the fixed initialization.
  bool warm_start = false;
  int jobs = 1;

  int effective_ensemble_size() const { return use_ucb ? ensemble_size : 1; }

  void validate() const {
    if (rounds < 1) throw Error("rounds must be >= 1");
    if (queries_per_round < 1) throw Error("queries_per_round must be >= 1");
    if (ensemble_size < 1) throw Error("ensemble_size must be >= 1");
    if (init_mutations < 1) throw Error("init_mutations must be >= 1");
    if (max_chain_restarts < 1) throw Error("max_chain_restarts must be >= 1");
    if (model.hidden_width < 1 || model.encoder_depth < 1) throw Error("model sizes must be >= 1");
    hmc.validate();
    train.validate();
  }
};

namespace detail {

// Stream tags, kept distinct so no two purposes share a stream.
enum StreamTag : std::uint64_t { kInitBatch = 1, kMemberInit, kTraining, kChain, kPadding, kSelect };

inline double count_mutants(std::size_t sites, std::size_t symbols, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 0; i < k; ++i) c = c * static_cast<double>(sites - i) / static_cast<double>(i + 1);
  return c * std::pow(static_cast<double>(symbols - 1), static_cast<double>(k));
}

/// Random mutant with a uniformly drawn number of substitutions in [1, max_mutations].
inline Sequence random_neighbor(const Sequence& x, std::size_t max_mutations, std::size_t symbols, Rng& rng) {
  std::size_t n = 1 + uniform_index(rng, std::max<std::size_t>(1, std::min(max_mutations, x.size())));
  return random_mutant(x, n, symbols, rng);
}

}  // namespace detail

/// First batch: the wild type plus K - 1 distinct random mutants.
inline std::vector<Sequence> initialize_round_one(const TaskDefinition& task, const RunConfig& cfg, Rng& rng) {
  const std::size_t k = static_cast<std::size_t>(cfg.queries_per_round);
  const std::size_t sites = task.length();
  const std::size_t symbols = task.alphabet.size();
  const std::size_t muts = static_cast<std::size_t>(cfg.init_mutations);
  if (muts > sites) throw Error("init_mutations exceeds the number of mutable sites");
  double available = 1.0 + detail::count_mutants(sites, symbols, muts);
  if (available < static_cast<double>(k))
    throw Error("search space holds only " + std::to_string(static_cast<long long>(available)) +
                " candidates for a first batch of " + std::to_string(k));
  std::vector<Sequence> batch{task.wild_type};
  std::set<Sequence> seen{task.wild_type};
  while (batch.size() < k) {
    Sequence s = random_mutant(task.wild_type, muts, symbols, rng);
    if (seen.insert(s).second) batch.push_back(std::move(s));
  }
  return batch;
}

inline std::vector<TrainingExample> training_set(const EvaluatedPool& pool, std::size_t symbols) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& [s, e] : pool.entries()) {
    lo = std::min(lo, e.structure_distance);
    hi = std::max(hi, e.structure_distance);
  }
  const double span = hi - lo;
  std::vector<TrainingExample> data;
  data.reserve(pool.size());
  for (const auto& [s, e] : pool.entries()) {
    double label = span > 0 ? (e.structure_distance - lo) / span : 0.0;
    data.push_back({encode_one_hot(s, symbols), e.fitness, label});
  }
  return data;
}

/// Fits every member on the pool. Each member starts from `start[i]` and uses
/// its own stream for minibatch shuffling.
inline SurrogateEnsemble train_ensemble(const std::vector<SurrogateModel>& start, const EvaluatedPool& pool,
                                        const RunConfig& cfg, int round) {
  const auto data = training_set(pool, pool.alphabet().size());
  SurrogateEnsemble ens;
  ens.members = start;
  parallel_for(ens.members.size(), cfg.jobs, [&](std::size_t i) {
    Rng rng = make_stream({cfg.master_seed, detail::kTraining, static_cast<std::uint64_t>(round), i});
    if (cfg.use_structure) {
      train_stage1(ens.members[i], data, cfg.train, rng);
      train_stage2(ens.members[i], data, cfg.train, rng, true);
    } else {
      train_stage2(ens.members[i], data, cfg.train, rng, false);
    }
  });
  return ens;
}

struct ProposalResult {
  std::vector<Sequence> candidates;  // union over members, sorted
  int proposals = 0;
  int acceptances = 0;
  int padded = 0;

  double acceptance_rate() const { return proposals ? static_cast<double>(acceptances) / proposals : 0.0; }
};

/// Per-member candidate sets D_i seeded with x_best and filled to K by HMC
/// chains (or random mutants in `random` proposal mode). Additions stop once
/// |D_i| = K; after `max_chain_restarts` chain batches the set is padded with
/// random mutants of x_best.
inline ProposalResult propose_candidates(const SurrogateEnsemble& ens, const Sequence& x_best, std::size_t symbols,
                                         const RunConfig& cfg, int round) {
  const std::size_t k = static_cast<std::size_t>(cfg.queries_per_round);
  const std::size_t m = ens.size();
  std::vector<std::set<Sequence>> sets(m);
  std::vector<int> proposals(m, 0), acceptances(m, 0), padded(m, 0);
  const double space = std::pow(static_cast<double>(symbols), static_cast<double>(x_best.size()));
  const std::size_t reachable = space < 1e15 ? static_cast<std::size_t>(space) : k;
  const std::size_t target = std::min(k, reachable);
  const std::uint64_t r = static_cast<std::uint64_t>(round);

  for (std::size_t i = 0; i < m; ++i) {
    auto& d = sets[i];
    d.insert(x_best);
    if (cfg.proposals == ProposalMode::hmc) {
      const SurrogatePotential potential{ens.members[i]};
      const std::size_t chains = static_cast<std::size_t>(cfg.hmc.chains);
      for (int restart = 0; restart < cfg.max_chain_restarts && d.size() < target; ++restart) {
        std::vector<ChainResult> results(chains);
        parallel_for(chains, cfg.jobs, [&](std::size_t c) {
          Rng rng = make_stream({cfg.master_seed, detail::kChain, r, i, static_cast<std::uint64_t>(restart), c});
          results[c] = hmc_chain(x_best, symbols, potential, cfg.hmc, rng);
        });
        for (const auto& res : results) {
          proposals[i] += res.proposals;
          acceptances[i] += res.acceptances;
          for (const auto& s : res.accepted) {
            if (d.size() >= target) break;
            d.insert(s);
          }
        }
      }
    }
    Rng pad = make_stream({cfg.master_seed, detail::kPadding, r, i});
    const std::size_t max_mut = cfg.proposals == ProposalMode::random ? static_cast<std::size_t>(cfg.init_mutations)
                                                                      : x_best.size();
    for (std::size_t attempts = 0; d.size() < target && attempts < 1000 * k; ++attempts) {
      if (d.insert(detail::random_neighbor(x_best, max_mut, symbols, pad)).second) ++padded[i];
    }
  }

  ProposalResult out;
  std::set<Sequence> all;
  for (std::size_t i = 0; i < m; ++i) {
    all.insert(sets[i].begin(), sets[i].end());
    out.proposals += proposals[i];
    out.acceptances += acceptances[i];
    out.padded += padded[i];
  }
  out.candidates.assign(all.begin(), all.end());
  return out;
}

using CandidateScorer = std::function<double(const Sequence&)>;

/// Drops candidates already measured, ranks the rest by score (descending, ties
/// by sequence string), keeps K. A shortfall is filled with random mutants of
/// the pool's best sequence that are neither measured nor already selected.
inline std::vector<Sequence> select_top_k(const std::vector<Sequence>& candidates, const EvaluatedPool& pool,
                                          std::size_t k, const CandidateScorer& score, Rng& rng) {
  struct Row {
    double score;
    std::string text;
    Sequence seq;
  };
  std::vector<Row> rows;
  std::set<Sequence> unique;
  for (const auto& c : candidates) {
    if (pool.contains(c) || !unique.insert(c).second) continue;
    rows.push_back({score(c), to_string(c, pool.alphabet()), c});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.text < b.text;
  });
  std::vector<Sequence> out;
  std::set<Sequence> chosen;
  for (auto& row : rows) {
    if (out.size() == k) break;
    chosen.insert(row.seq);
    out.push_back(std::move(row.seq));
  }
  if (out.size() < k && !pool.empty()) {
    const Sequence best = pool.best().first;
    const std::size_t symbols = pool.alphabet().size();
    for (std::size_t attempts = 0; out.size() < k && attempts < 1000 * k; ++attempts) {
      Sequence s = detail::random_neighbor(best, best.size(), symbols, rng);
      if (pool.contains(s) || !chosen.insert(s).second) continue;
      out.push_back(std::move(s));
    }
  }
  return out;
}

inline std::vector<Sequence> select_top_k(const SurrogateEnsemble& ens, const std::vector<Sequence>& candidates,
                                          const EvaluatedPool& pool, std::size_t k, Rng& rng) {
  const std::size_t symbols = pool.alphabet().size();
  return select_top_k(
      candidates, pool, k, [&](const Sequence& s) { return ucb_score(ens, encode_one_hot(s, symbols)); }, rng);
}

/// Oracle wrapper that counts calls and rejects repeated queries.
class CountingOracle {
 public:
  explicit CountingOracle(const Landscape& inner) : inner_(inner) {}

  OracleResponse query(const Sequence& s) {
    {
      std::lock_guard lock(mutex_);
      if (!seen_.insert(s).second) throw Error("oracle queried twice for the same sequence");
      ++calls_;
    }
    return inner_.query(s);
  }

  std::size_t calls() const { return calls_; }

 private:
  const Landscape& inner_;
  std::mutex mutex_;
  std::set<Sequence> seen_;
  std::size_t calls_ = 0;
};

struct RunResult {
  std::vector<RoundRecord> records;
  EvaluatedPool pool;
  std::size_t oracle_calls = 0;
  SurrogateEnsemble ensemble;
};

using RoundObserver = std::function<void(const RoundRecord&)>;

/// Initial member parameters, one fixed stream per member.
inline std::vector<SurrogateModel> initial_members(const TaskDefinition& task, const RunConfig& cfg) {
  ArchitectureConfig arch{task.length(), task.alphabet.size(), cfg.model.hidden_width, cfg.model.encoder_depth};
  std::vector<SurrogateModel> members;
  for (int i = 0; i < cfg.effective_ensemble_size(); ++i) {
    Rng seeder = make_stream({cfg.master_seed, detail::kMemberInit, static_cast<std::uint64_t>(i)});
    members.push_back(SurrogateModel::initialize(arch, seeder()));
  }
  return members;
}

/// The outer optimization loop: exactly `rounds` query events of at most K
/// sequences each. Proposal and selection run between query events only, so a
/// single-round run queries just the random first batch.
inline RunResult run_experiment(const TaskDefinition& task, const Landscape& oracle, const RunConfig& cfg,
                                const RoundObserver& on_round = {}) {
  task.validate();
  cfg.validate();
  const std::size_t k = static_cast<std::size_t>(cfg.queries_per_round);
  const std::size_t symbols = task.alphabet.size();

  RunResult result{{}, EvaluatedPool(task.alphabet), 0, {}};
  CountingOracle counter(oracle);
  Rng init_rng = make_stream({cfg.master_seed, detail::kInitBatch});
  std::vector<Sequence> batch = initialize_round_one(task, cfg, init_rng);
  std::vector<SurrogateModel> start = initial_members(task, cfg);

  std::size_t candidate_pool_size = 0;
  double acceptance_rate = 0.0;
  for (int round = 1; round <= cfg.rounds; ++round) {
    RoundRecord rec;
    rec.round_index = round;
    rec.candidate_pool_size = candidate_pool_size;
    rec.acceptance_rate = acceptance_rate;
    rec.round_max = -std::numeric_limits<double>::infinity();
    for (const auto& s : batch) {
      OracleResponse resp = counter.query(s);
      result.pool.add(s, {resp.fitness, resp.structure_distance, round});
      rec.queried.emplace_back(s, resp.fitness);
      rec.round_max = std::max(rec.round_max, resp.fitness);
    }
    rec.cumulative_max = cumulative_max(result.pool, round);
    rec.best_so_far = result.pool.best();
    rec.mean_topk = mean_fitness_topk(result.pool, std::min(k, result.pool.size()));
    result.records.push_back(rec);
    if (on_round) on_round(result.records.back());
    if (round == cfg.rounds) break;

    result.ensemble = train_ensemble(start, result.pool, cfg, round);
    if (cfg.warm_start) start = result.ensemble.members;
    const Sequence x_best = result.pool.best().first;
    ProposalResult proposal = propose_candidates(result.ensemble, x_best, symbols, cfg, round);
    Rng select_rng = make_stream({cfg.master_seed, detail::kSelect, static_cast<std::uint64_t>(round)});
    batch = select_top_k(result.ensemble, proposal.candidates, result.pool, k, select_rng);
    candidate_pool_size = proposal.candidates.size();
    acceptance_rate = proposal.acceptance_rate();
    if (batch.empty()) break;  // search space exhausted
  }
  result.oracle_calls = counter.calls();
  return result;
}

}  // namespace hades
