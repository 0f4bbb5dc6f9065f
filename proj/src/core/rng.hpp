#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dlsvm {

// Deterministic xoshiro256** generator. Every source of randomness in the
// toolkit (weight init, shuffling, dropout) derives from one master seed
// through named substreams, so individual components can be varied without
// perturbing the others and identical runs are bit-reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Substream whose seed is a hash of (master, name, index).
  static Rng stream(uint64_t master, std::string_view name, uint64_t index = 0);

  uint64_t next_u64();

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; generated values come out in pairs.
  double normal();

  // Normal(0, stddev) resampled until |v| <= bound*stddev.
  double truncated_normal(double stddev, double bound = 2.0);

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return next_u64() % n; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    // Fisher-Yates
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

uint64_t splitmix64(uint64_t& state);
uint64_t hash64(std::string_view s);

}  // namespace dlsvm
