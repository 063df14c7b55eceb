#pragma once

#include <array>
#include <cstdint>

#include "selcorr/mathx.hpp"

namespace selcorr {

// Splittable counter-based RNG: xoshiro256++ streams keyed by a splitmix64-style
// derivation of (parent key, tag). split() depends only on the key, never on the
// number of draws taken, so work units can derive their streams from logical ids
// and results stay independent of scheduling and worker count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(seed) { reseed(); }

  [[nodiscard]] Rng split(std::uint64_t tag) const { return Rng(mix(key_, tag)); }

  std::uint64_t key() const { return key_; }

  std::uint64_t u64() {
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

  // Uniform on [0,1).
  double uniform01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1), safe for quantile transforms.
  double uniform_open() { return (static_cast<double>(u64() >> 12) + 0.5) * 0x1.0p-52; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return u64() % n; }

  // Standard normal via the inverse CDF (one uniform per draw).
  double normal() { return normal_quantile(uniform_open()); }

  static std::uint64_t mix(std::uint64_t key, std::uint64_t tag) {
    return sm(key ^ sm(tag + 0x9E3779B97F4A7C15ULL));
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static std::uint64_t sm(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  void reseed() {
    std::uint64_t z = key_;
    for (auto& word : s_) word = z = sm(z);
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace selcorr
