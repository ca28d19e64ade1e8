#pragma once

// Seeded count noise with a fully specified algorithm, so histograms are
// reproducible across standard libraries (std::poisson_distribution is not).
//
// Algorithm identifier: "mt19937_64/u53/poisson-knuth-ptrs"
//   uniform:  (mt19937_64() >> 11) * 2^-53
//   mean < 10: Knuth multiplicative method
//   mean >= 10: Hoermann PTRS transformed rejection (1993)
//   normal:   Box-Muller, cosine branch only

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string_view>

namespace ringqed::noise {

inline constexpr std::string_view algorithm_id = "mt19937_64/u53/poisson-knuth-ptrs";

class CountNoise {
 public:
  explicit CountNoise(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::int64_t poisson(double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean < 10.0) {
      const double limit = std::exp(-mean);
      std::int64_t k = 0;
      double p = uniform();
      while (p > limit) {
        ++k;
        p *= uniform();
      }
      return k;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
      const double u = uniform() - 0.5;
      const double v = uniform();
      const double us = 0.5 - std::abs(u);
      const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
      if (us >= 0.07 && v <= vr) return k;
      if (k < 0 || (us < 0.013 && v > us)) continue;
      if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
          -mean + static_cast<double>(k) * loglam - std::lgamma(static_cast<double>(k) + 1.0))
        return k;
    }
  }

  /// Replaces each expected count by a Poisson draw, in order.
  void apply_poisson(std::span<double> expected) {
    for (double& x : expected) x = static_cast<double>(poisson(x));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ringqed::noise
