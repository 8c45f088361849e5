#include "censuslab/rng.hpp"

#include <cmath>

#include "censuslab/errors.hpp"

namespace censuslab {
namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view label, std::uint64_t index) {
  std::uint64_t h = kFnvOffset;
  for (char c : label) {
    h = (h ^ static_cast<unsigned char>(c)) * kFnvPrime;
  }
  for (int i = 0; i < 8; ++i) {
    h = (h ^ ((index >> (8 * i)) & 0xff)) * kFnvPrime;
  }
  std::uint64_t state = base ^ h;
  std::uint64_t out = splitmix64(state);
  out ^= splitmix64(state);
  return out;
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& s : s_) s = splitmix64(state);
}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::uint64_t Rng::uniform_below(std::uint64_t n) {
  if (n == 0) throw SamplingError("uniform_below: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t threshold = -n % n;
  for (;;) {
    const std::uint64_t r = next_u64();
    if (r >= threshold) return r % n;
  }
}

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::exponential() {
  double u;
  do {
    u = uniform01();
  } while (u <= 0.0);
  return -std::log(u);
}

std::size_t Rng::categorical(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) {
    if (w < 0.0 || !std::isfinite(w)) throw SamplingError("categorical: bad weight");
    total += w;
  }
  if (total <= 0.0) throw SamplingError("categorical: zero total weight");
  double x = uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    x -= weights[i];
    if (x < 0.0) return i;
  }
  // Rounding pushed x past the last positive weight.
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  throw SamplingError("categorical: zero total weight");
}

}  // namespace censuslab
