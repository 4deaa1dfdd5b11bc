#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace daymax {

/// Standard normal CDF.
inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// Standard normal quantile (Wichura's AS 241, double precision).
double norm_quantile(double p);

/// Log density of N(mean, var) at x.
inline double normal_logpdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * M_PI * var) - 0.5 * d * d / var;
}

// Deterministic RNG. All distributions are generated explicitly from the
// mt19937_64 stream so draws depend only on (seed, call sequence) and not
// on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform on (0, 1).
  double uniform() {
    // 53-bit mantissa, shifted into (0,1) so log() is always finite.
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller (one value per call).
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Gamma(shape, rate) via Marsaglia-Tsang.
  double gamma(double shape, double rate);

  /// Inverse gamma: 1 / Gamma(shape, rate) has IG(shape, rate) density.
  double inv_gamma(double shape, double rate) { return 1.0 / gamma(shape, rate); }

  /// N(mean, sd^2) truncated to (a, b), by inverse-CDF.
  double trunc_normal(double mean, double sd, double a, double b);

  /// Index draw proportional to exp(logw[k]).
  std::size_t categorical_logits(const std::vector<double>& logw);

 private:
  std::mt19937_64 eng_;
};

}  // namespace daymax
