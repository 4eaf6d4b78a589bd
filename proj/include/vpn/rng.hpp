#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vpn {

// Deterministic random source. Every draw is defined in terms of the raw
// mt19937_64 output stream, so sequences are identical across compilers;
// std::uniform_*_distribution is implementation-defined and never used.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], both inclusive. Rejection keeps it unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  bool bernoulli(double p) { return uniform() < p; }

  // Stable child seed for a named substream.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag,
                              std::uint64_t index = 0);

 private:
  std::mt19937_64 gen_;
};

}  // namespace vpn
