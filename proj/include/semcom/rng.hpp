#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace semcom {

// Deterministic PRNG (xoshiro256++ seeded via splitmix64). The standard
// library distributions are implementation-defined, so every draw used in
// experiments goes through this class to keep runs bit-reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix64(x);
    has_spare_gaussian_ = false;
    spare_gaussian_ = 0.0;
  }

  // Derives an independent stream, e.g. per party or per sentence.
  Rng fork(uint64_t stream_id) const {
    uint64_t x = state_[0] ^ (0x9e3779b97f4a7c15ULL * (stream_id + 1));
    x ^= state_[2] + 0xbf58476d1ce4e5b9ULL;
    return Rng(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 24 bits of mantissa (exact in float).
  float uniform() { return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f; }

  double uniform_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound).
  uint64_t uniform_below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller; second value cached.
  double gaussian() {
    if (has_spare_gaussian_) {
      has_spare_gaussian_ = false;
      return spare_gaussian_;
    }
    double u1 = uniform_double();
    while (u1 <= 1e-300) u1 = uniform_double();
    const double u2 = uniform_double();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi_u2 = 2.0 * 3.14159265358979323846 * u2;
    spare_gaussian_ = mag * std::sin(two_pi_u2);
    has_spare_gaussian_ = true;
    return mag * std::cos(two_pi_u2);
  }

  float gaussian_f() { return static_cast<float>(gaussian()); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t state_[4];
  bool has_spare_gaussian_;
  double spare_gaussian_;
};

}  // namespace semcom
