#pragma once

#include <cmath>
#include <limits>

#include "poolfreq/types.hpp"

namespace poolfreq {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline double log_sum_exp(double a, double b) {
  const double m = std::max(a, b);
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_factorial(int k) { return std::lgamma(k + 1.0); }

// log of n! / (z_1! ... z_H!)
inline double log_multinomial_coef(int n, const IntVec& z) {
  double acc = log_factorial(n);
  for (int h = 0; h < z.size(); ++h) acc -= log_factorial(z(h));
  return acc;
}

}  // namespace poolfreq
