#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace ctrrank {

// mt19937_64 plus hand-rolled distributions. The engine's output sequence is
// fixed by the standard; std::*_distribution is implementation-defined, so we
// avoid it to keep logs and permutation streams byte-identical everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  uint64_t next_u64() { return eng_(); }

  // uniform in [0,1) with 53 random bits
  double next_unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // uniform on {0,...,n-1} via multiply-shift
  uint64_t next_below(uint64_t n) {
    return static_cast<uint64_t>((static_cast<unsigned __int128>(eng_()) * n) >> 64);
  }

  // Marsaglia polar method with a cached spare
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_unit() - 1.0;
      v = 2.0 * next_unit() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  // Fisher-Yates permutation of 1..n
  std::vector<int> permutation(int n) {
    std::vector<int> p(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<size_t>(i)] = i + 1;
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(next_below(static_cast<uint64_t>(i) + 1));
      std::swap(p[static_cast<size_t>(i)], p[static_cast<size_t>(j)]);
    }
    return p;
  }

  // splitmix64 finalizer; used to derive independent stream seeds
  static uint64_t mix(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ctrrank
