#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace cavopt {

// FNV-1a, used to derive per-context seeds so that independent random draws
// (optimizer restarts, solver starting blocks, ...) do not share streams.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t mix_seed(std::uint64_t user_seed, std::string_view context,
                              std::uint64_t salt = 0) {
  return user_seed ^ fnv1a(context) ^ (salt * 0x9e3779b97f4a7c15ull);
}

// Deterministic RNG. Gaussian draws go through an explicit Box-Muller
// transform because std::normal_distribution is not pinned across library
// implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() {
    // 53-bit mantissa in [0,1)
    return (gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cavopt
