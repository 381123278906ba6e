#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>

namespace carerl {

// Deterministic, platform-independent randomness.
//
// Generator: xoshiro256++ (Blackman & Vigna), seeded from a single 64-bit
// value through SplitMix64. Every simulation draws from an Rng owned by the
// caller; parallel batches derive one independent substream per unit of work
// from (root seed, index path), so serial and threaded execution produce the
// same numbers.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Folds an index path into a root seed. derive_seed(s, {a, b}) and
// derive_seed(s, {a, c}) are unrelated streams for b != c.
inline std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = root;
  for (std::uint64_t p : path) {
    state ^= splitmix64(state) + p;
    state = splitmix64(state);
  }
  return splitmix64(state);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), unbiased (Lemire with rejection).
  std::uint64_t below(std::uint64_t n) {
    __uint128_t m = static_cast<__uint128_t>(next()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (0ULL - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Uniform integer in [lo, hi] inclusive.
  long range(long lo, long hi) {
    return lo + static_cast<long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Index sampled from cumulative probabilities (cum.back() == 1).
  int categorical(std::span<const double> cum) {
    const double u = uniform01();
    for (std::size_t i = 0; i + 1 < cum.size(); ++i)
      if (u < cum[i]) return static_cast<int>(i);
    return static_cast<int>(cum.size()) - 1;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

}  // namespace carerl
