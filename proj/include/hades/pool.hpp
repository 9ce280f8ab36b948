#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "hades/seq_core.hpp"

namespace hades {

struct PoolEntry {
  double fitness = 0.0;
  double structure_distance = 0.0;
  int round_acquired = 0;
};

/// Ground-truth measurements G. Keys are unique; values come only from the oracle.
class EvaluatedPool {
 public:
  explicit EvaluatedPool(Alphabet alphabet = {}) : alphabet_(std::move(alphabet)) {}

  const Alphabet& alphabet() const { return alphabet_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool contains(const Sequence& s) const { return entries_.count(s) != 0; }
  const std::map<Sequence, PoolEntry>& entries() const { return entries_; }
  const PoolEntry& at(const Sequence& s) const { return entries_.at(s); }

  void add(const Sequence& s, PoolEntry e) {
    if (!entries_.emplace(s, e).second) throw Error("pool already contains " + to_string(s, alphabet_));
  }

  /// Highest-fitness entry; ties go to the lexicographically smallest string.
  std::pair<Sequence, double> best() const {
    if (entries_.empty()) throw Error("pool is empty");
    const std::pair<const Sequence, PoolEntry>* best = nullptr;
    std::string best_str;
    for (const auto& kv : entries_) {
      if (!best || kv.second.fitness > best->second.fitness) {
        best = &kv;
        best_str = to_string(kv.first, alphabet_);
      } else if (kv.second.fitness == best->second.fitness) {
        std::string s = to_string(kv.first, alphabet_);
        if (s < best_str) {
          best = &kv;
          best_str = std::move(s);
        }
      }
    }
    return {best->first, best->second.fitness};
  }

 private:
  Alphabet alphabet_;
  std::map<Sequence, PoolEntry> entries_;
};

struct RoundRecord {
  int round_index = 0;
  std::vector<std::pair<Sequence, double>> queried;
  std::pair<Sequence, double> best_so_far;
  /// Size of the candidate set the queried batch was selected from (0 for the random first batch).
  std::size_t candidate_pool_size = 0;
  double acceptance_rate = 0.0;
  double round_max = 0.0;
  double cumulative_max = 0.0;
  double mean_topk = 0.0;
};

}  // namespace hades
