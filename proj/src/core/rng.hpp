#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace structfact {

// Seed mixing (splitmix64). Used to derive independent stream seeds from a
// master seed and replication indices, so results do not depend on which
// worker executes which replication.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(master ^ 0x6a09e667f3bcc909ULL) + splitmix64(a) + 3 * splitmix64(b));
}

// Deterministic random stream: mt19937_64 (bit-exact per the standard) with
// hand-rolled uniform and Gaussian transforms, since the std::*_distribution
// classes are not bit-stable across standard library implementations.
//
// uniform01 uses the top 53 bits; normal uses Box-Muller, consuming uniforms
// in pairs and caching the second variate.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Uniform on [0, 1).
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 on (0, 1] keeps the log finite.
    double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    double u2 = uniform01();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace structfact
