#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <compare>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hades/rng.hpp"

namespace hades {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::string_view kAminoAcids = "ACDEFGHIKLMNPQRSTVWY";

class Alphabet {
 public:
  Alphabet() : Alphabet(kAminoAcids) {}

  explicit Alphabet(std::string_view symbols) : symbols_(symbols) {
    if (symbols_.size() < 2) throw Error("alphabet needs at least two symbols");
    index_.fill(-1);
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
      auto c = static_cast<unsigned char>(symbols_[i]);
      if (index_[c] >= 0) throw Error(std::string("duplicate alphabet symbol '") + symbols_[i] + "'");
      index_[c] = static_cast<int>(i);
    }
  }

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbols() const { return symbols_; }
  char symbol(int index) const { return symbols_.at(static_cast<std::size_t>(index)); }

  std::optional<int> index_of(char c) const {
    int i = index_[static_cast<unsigned char>(c)];
    if (i < 0) return std::nullopt;
    return i;
  }

  bool operator==(const Alphabet& other) const { return symbols_ == other.symbols_; }

 private:
  std::string symbols_;
  std::array<int, 256> index_{};
};

/// Fixed-length vector of alphabet indices. Ordering is lexicographic on indices.
class Sequence {
 public:
  Sequence() = default;
  explicit Sequence(std::vector<int> indices) : indices_(std::move(indices)) {
    for (int v : indices_)
      if (v < 0) throw Error("negative sequence index");
  }
  Sequence(std::vector<int> indices, std::size_t alphabet_size) : Sequence(std::move(indices)) {
    for (int v : indices_)
      if (static_cast<std::size_t>(v) >= alphabet_size) throw Error("sequence index outside alphabet");
  }

  std::size_t size() const { return indices_.size(); }
  int operator[](std::size_t i) const { return indices_[i]; }
  const std::vector<int>& indices() const { return indices_; }

  Sequence with(std::size_t pos, int symbol) const {
    Sequence out = *this;
    out.indices_.at(pos) = symbol;
    return out;
  }

  auto operator<=>(const Sequence&) const = default;
  bool operator==(const Sequence&) const = default;

 private:
  std::vector<int> indices_;
};

inline Sequence parse_sequence(std::string_view text, const Alphabet& alphabet) {
  std::vector<int> idx;
  idx.reserve(text.size());
  for (char c : text) {
    auto i = alphabet.index_of(c);
    if (!i) throw Error("symbol '" + std::string(1, c) + "' not in alphabet \"" + alphabet.symbols() + "\"");
    idx.push_back(*i);
  }
  if (idx.empty()) throw Error("empty sequence");
  return Sequence(std::move(idx), alphabet.size());
}

inline std::string to_string(const Sequence& seq, const Alphabet& alphabet) {
  std::string s;
  s.reserve(seq.size());
  for (int v : seq.indices()) s.push_back(alphabet.symbol(v));
  return s;
}

/// Relaxed one-hot state q: an L x S matrix with every component in [0, 1].
class ContinuousState {
 public:
  ContinuousState() = default;
  explicit ContinuousState(Matrix values) : values_(std::move(values)) {
    for (Eigen::Index i = 0; i < values_.size(); ++i) {
      double v = values_.data()[i];
      if (!(v >= 0.0 && v <= 1.0)) throw Error("continuous state component outside [0, 1]");
    }
  }

  const Matrix& values() const { return values_; }
  Eigen::Index sites() const { return values_.rows(); }
  Eigen::Index symbols() const { return values_.cols(); }

 private:
  Matrix values_;
};

/// HMC auxiliary momentum p, same shape as the state.
struct Momentum {
  Matrix values;
};

struct TaskDefinition {
  Alphabet alphabet;
  Sequence wild_type;
  std::optional<std::string> full_sequence_template;
  std::vector<std::size_t> mutable_positions;

  std::size_t length() const { return wild_type.size(); }

  void validate() const {
    if (wild_type.size() == 0) throw Error("wild type is empty");
    for (int v : wild_type.indices())
      if (static_cast<std::size_t>(v) >= alphabet.size()) throw Error("wild type outside alphabet");
    if (mutable_positions.empty()) return;
    if (mutable_positions.size() != wild_type.size())
      throw Error("mutable_positions length must equal the wild-type length");
    for (std::size_t i = 1; i < mutable_positions.size(); ++i)
      if (mutable_positions[i] <= mutable_positions[i - 1]) throw Error("mutable_positions must be strictly increasing");
    if (full_sequence_template && mutable_positions.back() >= full_sequence_template->size())
      throw Error("mutable position beyond template length");
  }

  /// Full-length sequence with the mutable sites replaced; requires a template.
  std::string full_sequence(const Sequence& seq) const {
    if (!full_sequence_template) throw Error("task has no full-sequence template");
    std::string out = *full_sequence_template;
    for (std::size_t i = 0; i < mutable_positions.size(); ++i) out[mutable_positions[i]] = alphabet.symbol(seq[i]);
    return out;
  }
};

inline ContinuousState encode_one_hot(const Sequence& seq, std::size_t alphabet_size) {
  Matrix q = Matrix::Zero(static_cast<Eigen::Index>(seq.size()), static_cast<Eigen::Index>(alphabet_size));
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (static_cast<std::size_t>(seq[i]) >= alphabet_size) throw Error("sequence index outside alphabet");
    q(static_cast<Eigen::Index>(i), seq[i]) = 1.0;
  }
  return ContinuousState(std::move(q));
}

/// Per-row argmax; ties go to the lowest index.
inline Sequence discretize_matrix(const Matrix& q) {
  std::vector<int> idx(static_cast<std::size_t>(q.rows()));
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < q.cols(); ++j)
      if (q(i, j) > q(i, best)) best = j;
    idx[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return Sequence(std::move(idx));
}

inline Sequence discretize(const ContinuousState& q) { return discretize_matrix(q.values()); }

/// Substitution-only distance; sequences share a fixed length.
inline std::size_t edit_distance(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) throw Error("edit_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
  return d;
}

inline Sequence random_mutant(const Sequence& wt, std::size_t n_mutations, std::size_t alphabet_size, Rng& rng) {
  if (n_mutations < 1 || n_mutations > wt.size())
    throw Error("random_mutant: n_mutations must lie in [1, L], got " + std::to_string(n_mutations));
  if (alphabet_size < 2) throw Error("random_mutant: alphabet too small");
  std::vector<std::size_t> positions(wt.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  // partial Fisher-Yates for the first n positions
  for (std::size_t i = 0; i < n_mutations; ++i) {
    std::size_t j = i + uniform_index(rng, positions.size() - i);
    std::swap(positions[i], positions[j]);
  }
  std::vector<int> idx = wt.indices();
  for (std::size_t i = 0; i < n_mutations; ++i) {
    std::size_t pos = positions[i];
    int draw = static_cast<int>(uniform_index(rng, alphabet_size - 1));
    idx[pos] = draw >= wt[pos] ? draw + 1 : draw;
  }
  return Sequence(std::move(idx), alphabet_size);
}

}  // namespace hades
