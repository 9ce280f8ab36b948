#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hades/rng.hpp"
#include "hades/seq_core.hpp"

namespace hades {

enum class ProxyMode { weighted_hamming, smooth_random };

/// Synthetic structural distance to the wild type, standing in for a folded-structure RMSD.
class ProxyStructureOracle {
 public:
  static constexpr std::size_t kEmbeddingDim = 16;

  ProxyStructureOracle(std::size_t sites, std::size_t symbols, ProxyMode mode, std::uint64_t seed)
      : mode_(mode), weights_(static_cast<Eigen::Index>(sites), static_cast<Eigen::Index>(symbols)) {
    Rng rng = make_stream({seed, 0x57u});
    // strictly positive so that distance zero means identity
    for (Eigen::Index i = 0; i < weights_.size(); ++i) weights_.data()[i] = 0.1 + 0.9 * uniform01(rng);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(kEmbeddingDim)));
    embedding_.resize(static_cast<Eigen::Index>(kEmbeddingDim), static_cast<Eigen::Index>(sites * symbols));
    for (Eigen::Index i = 0; i < embedding_.size(); ++i) embedding_.data()[i] = normal(rng);
  }

  ProxyMode mode() const { return mode_; }
  const Matrix& weights() const { return weights_; }

  double distance(const Sequence& seq, const Sequence& wt) const {
    if (seq.size() != wt.size()) throw Error("structure distance: length mismatch");
    if (seq.size() != static_cast<std::size_t>(weights_.rows())) throw Error("structure distance: wrong sequence length");
    if (mode_ == ProxyMode::weighted_hamming) {
      double d = 0.0;
      for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq[i] != wt[i]) d += weights_(static_cast<Eigen::Index>(i), seq[i]);
      return d;
    }
    Eigen::VectorXd diff = Eigen::VectorXd::Zero(embedding_.rows());
    const auto symbols = weights_.cols();
    for (std::size_t i = 0; i < seq.size(); ++i) {
      diff += embedding_.col(static_cast<Eigen::Index>(i) * symbols + seq[i]);
      diff -= embedding_.col(static_cast<Eigen::Index>(i) * symbols + wt[i]);
    }
    return diff.norm();
  }

 private:
  ProxyMode mode_;
  Matrix weights_;
  Matrix embedding_;
};

inline double proxy_structure_distance(const ProxyStructureOracle& oracle, const Sequence& seq, const Sequence& wt) {
  return oracle.distance(seq, wt);
}

struct StructureChannel {
  ProxyStructureOracle oracle;
  Sequence wild_type;
};

struct OracleResponse {
  double fitness = 0.0;
  double structure_distance = 0.0;
};

/// Ground-truth oracle F(x). Implementations are pure and safe for concurrent readers.
class Landscape {
 public:
  virtual ~Landscape() = default;

  virtual double fitness(const Sequence& seq) const = 0;
  virtual std::optional<std::uint64_t> space_size() const = 0;

  /// Zero when no structure channel is attached.
  virtual double structure_distance(const Sequence& seq) const {
    return structure_ ? structure_->oracle.distance(seq, structure_->wild_type) : 0.0;
  }

  OracleResponse query(const Sequence& seq) const { return {fitness(seq), structure_distance(seq)}; }

  void attach_structure(StructureChannel channel) { structure_ = std::move(channel); }

 private:
  std::optional<StructureChannel> structure_;
};

enum class UnknownPolicy { error, zero };

class LookupLandscape : public Landscape {
 public:
  LookupLandscape(std::map<Sequence, double> table, UnknownPolicy policy)
      : table_(std::move(table)), policy_(policy) {
    if (table_.empty()) throw Error("lookup landscape: empty table");
    max_fitness_ = -std::numeric_limits<double>::infinity();
    for (const auto& [seq, y] : table_) max_fitness_ = std::max(max_fitness_, y);
    if (!(max_fitness_ > 0.0)) throw Error("lookup landscape: maximum fitness must be positive to normalize");
  }

  double fitness(const Sequence& seq) const override {
    auto it = table_.find(seq);
    if (it == table_.end()) {
      if (policy_ == UnknownPolicy::zero) return 0.0;
      throw Error("lookup landscape: sequence not in table");
    }
    return it->second / max_fitness_;
  }

  std::optional<std::uint64_t> space_size() const override { return table_.size(); }

  double max_fitness() const { return max_fitness_; }
  const std::map<Sequence, double>& table() const { return table_; }

 private:
  std::map<Sequence, double> table_;
  UnknownPolicy policy_;
  double max_fitness_ = 0.0;
};

namespace detail {

inline std::optional<double> parse_decimal(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

/// Reads `sequence<TAB>fitness` rows. A first row whose fitness field is not
/// numeric is treated as a header. LF and CRLF line endings are accepted.
inline LookupLandscape parse_lookup(std::istream& in, const std::string& source, const TaskDefinition& task,
                                    UnknownPolicy policy) {
  std::map<Sequence, double> table;
  std::string line;
  std::size_t lineno = 0;
  bool first = true;
  auto fail = [&](const std::string& msg) { throw Error(source + ":" + std::to_string(lineno) + ": " + msg); };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      fail("expected two tab-separated columns");
    std::string seq_text = line.substr(0, tab);
    auto value = detail::parse_decimal(line.substr(tab + 1));
    if (!value) {
      if (first) {
        first = false;
        continue;
      }
      fail("fitness is not a decimal number");
    }
    first = false;
    Sequence seq;
    try {
      seq = parse_sequence(seq_text, task.alphabet);
    } catch (const Error& e) {
      fail(e.what());
    }
    if (seq.size() != task.length())
      fail("sequence length " + std::to_string(seq.size()) + " != task length " + std::to_string(task.length()));
    if (!table.emplace(std::move(seq), *value).second) fail("duplicate sequence " + seq_text);
  }
  if (table.empty()) throw Error(source + ": no data rows");
  return LookupLandscape(std::move(table), policy);
}

inline LookupLandscape load_lookup(const std::string& path, const TaskDefinition& task, UnknownPolicy policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lookup file " + path);
  return parse_lookup(in, path, task, policy);
}

/// Kauffman NK landscape with cyclic neighborhoods, normalized so its maximum is 1.
class NkLandscape : public Landscape {
 public:
  NkLandscape(std::size_t sites, std::size_t symbols, std::size_t k, std::uint64_t seed)
      : sites_(sites), symbols_(symbols), k_(k), seed_(seed) {
    if (sites == 0 || symbols < 2) throw Error("nk landscape: need L >= 1 and S >= 2");
    if (k >= sites) throw Error("nk landscape: k must satisfy 0 <= k < L");
    double entries = std::pow(static_cast<double>(symbols), static_cast<double>(k + 1));
    if (entries > 5e7) throw Error("nk landscape: contribution tables too large");
    Rng rng = make_stream({seed, 0x4eu});
    std::size_t n = static_cast<std::size_t>(entries);
    tables_.resize(sites);
    for (auto& table : tables_) {
      table.resize(n);
      for (double& v : table) v = uniform01(rng);
    }
    compute_normalizer();
  }

  std::size_t sites() const { return sites_; }
  std::size_t symbols() const { return symbols_; }
  std::size_t k() const { return k_; }
  std::uint64_t seed() const { return seed_; }
  double normalizer() const { return max_raw_; }
  bool normalizer_exact() const { return exact_; }

  /// Unnormalized mean of per-site contributions.
  double raw_fitness(const Sequence& seq) const {
    check(seq);
    double acc = 0.0;
    for (std::size_t i = 0; i < sites_; ++i) acc += contribution(i, seq);
    return acc / static_cast<double>(sites_);
  }

  double contribution(std::size_t site, const Sequence& seq) const {
    std::size_t index = 0;
    std::size_t stride = 1;
    for (std::size_t j = 0; j <= k_; ++j) {
      index += static_cast<std::size_t>(seq[(site + j) % sites_]) * stride;
      stride *= symbols_;
    }
    return tables_[site][index];
  }

  double fitness(const Sequence& seq) const override { return std::min(1.0, raw_fitness(seq) / max_raw_); }

  std::optional<std::uint64_t> space_size() const override {
    double n = std::pow(static_cast<double>(symbols_), static_cast<double>(sites_));
    if (n > 1.8e19) return std::nullopt;
    return static_cast<std::uint64_t>(std::llround(n));
  }

  /// Calls fn(seq) for every sequence in lexicographic index order.
  template <class Fn>
  static void enumerate(std::size_t sites, std::size_t symbols, Fn&& fn) {
    std::vector<int> idx(sites, 0);
    while (true) {
      fn(Sequence(idx));
      std::size_t i = sites;
      while (i > 0) {
        --i;
        if (++idx[i] < static_cast<int>(symbols)) break;
        idx[i] = 0;
        if (i == 0) return;
      }
      if (sites == 0) return;
    }
  }

 private:
  void check(const Sequence& seq) const {
    if (seq.size() != sites_) throw Error("nk landscape: sequence length mismatch");
    for (int v : seq.indices())
      if (static_cast<std::size_t>(v) >= symbols_) throw Error("nk landscape: symbol outside alphabet");
  }

  void compute_normalizer() {
    max_raw_ = 0.0;
    double space = std::pow(static_cast<double>(symbols_), static_cast<double>(sites_));
    if (space <= 1e6) {
      exact_ = true;
      enumerate(sites_, symbols_, [&](const Sequence& s) { max_raw_ = std::max(max_raw_, raw_fitness(s)); });
    } else {
      exact_ = false;
      Rng rng = make_stream({seed_, 0x9b0bu});
      std::vector<int> idx(sites_);
      for (int probe = 0; probe < 100000; ++probe) {
        for (auto& v : idx) v = static_cast<int>(uniform_index(rng, symbols_));
        max_raw_ = std::max(max_raw_, raw_fitness(Sequence(idx)));
      }
    }
    if (!(max_raw_ > 0.0)) throw Error("nk landscape: degenerate normalizer");
  }

  std::size_t sites_, symbols_, k_;
  std::uint64_t seed_;
  std::vector<std::vector<double>> tables_;
  double max_raw_ = 1.0;
  bool exact_ = true;
};

inline double nk_fitness(const NkLandscape& landscape, const Sequence& seq) { return landscape.fitness(seq); }

}  // namespace hades
