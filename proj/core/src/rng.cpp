#include "asbc/rng.hpp"

#include <cmath>

namespace asbc {

namespace {

inline std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t v, int k) noexcept {
  return (v << k) | (v >> (64 - k));
}

constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace

Rng::Rng(std::uint64_t seed) noexcept {
  std::uint64_t s = seed;
  for (auto& word : state_) word = splitmix64(s);
}

std::uint64_t Rng::next() noexcept {
  const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

double Rng::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

double Rng::normal(double mean, double stddev) noexcept {
  return mean + stddev * normal();
}

std::uint64_t Rng::below(std::uint64_t n) noexcept {
  const std::uint64_t threshold = (0 - n) % n;
  for (;;) {
    const std::uint64_t r = next();
    if (r >= threshold) return r % n;
  }
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                          std::uint64_t index) noexcept {
  // FNV-1a over the label, then splitmix-style mixing with root and index.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : stage) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = root;
  std::uint64_t a = splitmix64(x);
  x ^= h;
  std::uint64_t b = splitmix64(x);
  x ^= index * 0x9e3779b97f4a7c15ULL;
  std::uint64_t c = splitmix64(x);
  return a ^ rotl(b, 13) ^ rotl(c, 37);
}

}  // namespace asbc
