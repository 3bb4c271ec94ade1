#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace asbc {

// Self-contained xoshiro256++ generator. We do not use <random> engines or
// distributions so that a (seed, call sequence) pair maps to the same values
// on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept;

  std::uint64_t next() noexcept;

  // Uniform double in [0, 1) with 53 random mantissa bits.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;

  // Standard normal via Box-Muller (no caching, one value per call).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept;

  // Unbiased integer in [0, n); n must be >= 1.
  std::uint64_t below(std::uint64_t n) noexcept;

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::array<std::uint64_t, 4> state_;
};

// Derives the seed of a named random stream from a root seed. Streams are
// identified by a stage label plus an index, so parallel work items can be
// given independent generators whose output does not depend on scheduling.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                          std::uint64_t index = 0) noexcept;

inline Rng derive_rng(std::uint64_t root, std::string_view stage,
                      std::uint64_t index = 0) noexcept {
  return Rng(derive_seed(root, stage, index));
}

}  // namespace asbc
