#pragma once

#include <cmath>
#include <numbers>

namespace dmchan::channels {

/**
 * Bessel function of the first kind, order zero.
 *
 * |x| <= 12: alternating power series Σ (−1)^m/(m!)² (x/2)^{2m}.
 * |x| >  12: Hankel asymptotic expansion, truncated at its smallest term.
 * Absolute error stays below 1e-9 across the range.
 */
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x <= 12.0) {
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int m = 1; m < 200; ++m) {
      term *= -q / (static_cast<double>(m) * static_cast<double>(m));
      sum += term;
      if (std::abs(term) < 1e-17 * std::max(1.0, std::abs(sum)) && static_cast<double>(m) > 0.5 * x) break;
    }
    return sum;
  }

  // term_k = Π_{j<=k} (−(2j−1)²) / (k! (8x)^k); P takes even k, Q odd k.
  double p = 1.0, q = 0.0;
  double term = 1.0;
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(odd * odd) / (static_cast<double>(k) * 8.0 * x);
    if (std::abs(term) > std::abs(prev)) break;
    const int half = k / 2;
    if (k % 2 == 0) {
      p += (half % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      q += (half % 2 == 0 ? 1.0 : -1.0) * term;
    }
    prev = term;
    if (std::abs(term) < 1e-17) break;
  }
  const double chi = x - 0.25 * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace dmchan::channels
