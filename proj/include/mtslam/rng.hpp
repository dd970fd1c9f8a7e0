#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace mtslam {

// splitmix64, used for seed derivation so that derived streams are
// well-separated even for adjacent inputs.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t mix64(uint64_t a, uint64_t b) { return mix64(mix64(a) ^ b); }

inline uint64_t mix64(uint64_t a, uint64_t b, uint64_t c) {
  return mix64(mix64(a, b) ^ c);
}

// Deterministic RNG. The mt19937_64 engine output is pinned by the standard;
// the distributions below are hand-rolled because the std:: distribution
// objects are implementation-defined and would break cross-toolchain
// reproducibility of corpora and training runs.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t bits() { return eng_(); }

  // Uniform in [0,1) with 53 random bits.
  double uniform() {
    return static_cast<double>(bits() >> 11) * (1.0 / 9007199254740992.0);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1. Rejection-free modulo bias is
  // negligible for the n used here, but keep it exact anyway.
  uint64_t below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = bits();
    while (v >= limit) v = bits();
    return v % n;
  }

  int range_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Sample k distinct indices out of n, order preserved (ascending).
  std::vector<int> sample_indices(int n, int k) {
    std::vector<int> picked;
    picked.reserve(static_cast<size_t>(k));
    // Selection sampling (Knuth 3.4.2): one pass, deterministic.
    int need = k;
    for (int i = 0; i < n && need > 0; ++i) {
      if (below(static_cast<uint64_t>(n - i)) < static_cast<uint64_t>(need)) {
        picked.push_back(i);
        --need;
      }
    }
    return picked;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mtslam
