#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vcreg {

// Seeded RNG with hand-rolled draw transforms. mt19937_64's output sequence is
// pinned by the standard, and avoiding std::*_distribution keeps phantom bytes
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  uint64_t raw() { return gen_(); }

  // independent stream for a named sub-purpose
  Rng fork(uint64_t salt) { return Rng(gen_() ^ (salt * 0x9e3779b97f4a7c15ull)); }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace vcreg
