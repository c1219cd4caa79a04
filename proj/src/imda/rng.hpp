#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace imda {

using Rng = std::mt19937_64;

// Independent stream derived from a run seed and a list of tags
// (stream kind, set index, pass, ...).
inline Rng make_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * tags.size());
  auto push = [&](std::uint64_t v) {
    words.push_back(static_cast<std::uint32_t>(v & 0xffffffffu));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  };
  push(seed);
  for (auto t : tags) push(t);
  std::seed_seq seq(words.begin(), words.end());
  return Rng(seq);
}

// Stream tags.
enum StreamTag : std::uint64_t {
  kStreamInit = 1,
  kStreamBatches = 2,
  kStreamNoise = 3,
  kStreamAux = 4,
  kStreamData = 5,
  kStreamShift = 6,
};

}  // namespace imda
