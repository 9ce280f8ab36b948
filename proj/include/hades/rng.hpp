#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace hades {

using Rng = std::mt19937_64;

/// Independent stream keyed by a master seed and a path of integer tags
/// (e.g. {seed, round, member, chain}). Streams are never shared between workers.
inline Rng make_stream(std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(path.size() * 2 + 1);
  words.push_back(0x48414445u);
  for (std::uint64_t v : path) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

/// Uniform double in [0, 1) built from the top 53 bits, independent of the
/// standard library's distribution implementation.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace hades
