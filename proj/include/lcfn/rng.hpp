#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace lcfn {

// FNV-1a over a byte string. Used for rng sub-stream derivation and for
// content digests of dataset and config files. Stable across platforms.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 finalizer; spreads structured seeds over the full state space.
inline std::uint64_t mix_seed(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stable named sub-seed of a run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view name) {
  return mix_seed(seed ^ fnv1a64(name));
}

// Deterministic random source. All distributions are implemented here rather
// than with std::*_distribution so that streams are identical across standard
// library implementations. Every consumer derives a named sub-stream from the
// single run seed; two sub-streams never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng substream(std::uint64_t seed, std::string_view name) {
    return Rng(derive_seed(seed, name));
  }

  // Indexed sub-stream, e.g. one per epoch or per retry attempt.
  static Rng substream(std::uint64_t seed, std::string_view name,
                       std::uint64_t index) {
    return Rng(mix_seed(derive_seed(seed, name) + index));
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Unbiased uniform integer in [0, bound). bound must be >= 1.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t limit = max - max % bound;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % bound;
  }

  // Box-Muller; caches the second variate.
  double normal(double mean = 0.0, double stddev = 1.0) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = mag * std::sin(two_pi * u2);
    has_spare_ = true;
    return mean + stddev * mag * std::cos(two_pi * u2);
  }

  // Fisher-Yates. std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lcfn
