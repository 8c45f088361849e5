#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace censuslab {

// Stable seed derivation so each pipeline stage (and each indexed unit of
// work inside a stage) gets an independent stream from one global seed.
std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index = 0);

// xoshiro256** with hand-rolled sampling helpers. std::uniform_*_distribution
// is implementation-defined, which would break byte-identical reruns across
// toolchains, so nothing from <random> is used for actual draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform on [0, n); rejection sampled, n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n);

  // Uniform on [0, 1) with 53 random bits.
  double uniform01();

  // Exponential(1) via inversion.
  double exponential();

  // Index sampled proportionally to non-negative weights (not necessarily
  // normalized). Zero total weight is an error.
  std::size_t categorical(const std::vector<double>& weights);

 private:
  std::uint64_t s_[4];
};

}  // namespace censuslab
