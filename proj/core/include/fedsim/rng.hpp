#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace fedsim::rng {

// Every random decision in the simulator draws from a stream derived from
// (master seed, purpose, indices). Streams for different purposes never
// interleave, so e.g. adding per-round mask draws cannot shift the client
// sampling sequence.
enum class Purpose : std::uint64_t {
  ModelInit = 1,
  Partition = 2,
  ClientSampling = 3,
  ClientShuffle = 4,
  MaskDraw = 5,
  SynthMeans = 6,
  SynthNoise = 7,
  PoolDraw = 8,
  PoolAugment = 9,
  SignBatch = 10,
  GammaTrial = 11,
  Warmstart = 12,
};

std::uint64_t derive(std::uint64_t master, Purpose purpose, std::uint64_t a = 0,
                     std::uint64_t b = 0);

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t master, Purpose purpose,
                          std::uint64_t a = 0, std::uint64_t b = 0) {
  return Engine(derive(master, purpose, a, b));
}

// Unbiased integer in [0, n). Stdlib distributions are implementation
// defined, so all draws below are spelled out explicitly.
std::uint64_t uniform_below(Engine& eng, std::uint64_t n);

// Uniform in [0, 1) with 53 bits of precision.
double uniform01(Engine& eng);

// Standard normal via Box-Muller (one value per call).
double normal(Engine& eng);

// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Engine& eng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(eng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// k distinct values from [0, n), in draw order (partial Fisher-Yates).
std::vector<std::uint32_t> sample_without_replacement(std::uint64_t n,
                                                      std::uint64_t k,
                                                      Engine& eng);

}  // namespace fedsim::rng
