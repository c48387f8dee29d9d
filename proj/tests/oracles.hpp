// Independent reference implementations used only by tests. Everything here
// is written the slow, obvious way on purpose.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "poolfreq/types.hpp"

namespace oracle {

using poolfreq::IntMat;
using poolfreq::IntVec;
using poolfreq::Mat;
using poolfreq::Vec;

// All compositions of n into h nonnegative parts.
inline std::vector<IntVec> compositions(int n, int h) {
  std::vector<IntVec> out;
  IntVec z = IntVec::Zero(h);
  std::function<void(int, int)> rec = [&](int idx, int rem) {
    if (idx == h - 1) {
      z(idx) = rem;
      out.push_back(z);
      return;
    }
    for (int v = 0; v <= rem; ++v) {
      z(idx) = v;
      rec(idx + 1, rem - v);
    }
  };
  rec(0, n);
  return out;
}

// Brute-force fiber: compositions of n satisfying A z = y.
inline std::vector<IntVec> fiber(const IntMat& a, const IntVec& y, int n) {
  std::vector<IntVec> out;
  for (const auto& z : compositions(n, static_cast<int>(a.cols())))
    if ((a * z - y).isZero(0)) out.push_back(z);
  return out;
}

inline std::vector<std::vector<int>> sorted_set(const std::vector<IntVec>& zs) {
  std::vector<std::vector<int>> out;
  for (const auto& z : zs) out.emplace_back(z.data(), z.data() + z.size());
  std::sort(out.begin(), out.end());
  return out;
}

// Likelihood by summing over ordered draws: p(y|p) = sum over all h^n
// sequences whose haplotype counts map to y of prod_j p[s_j]. Independent
// of any multinomial-coefficient bookkeeping.
inline double sequence_likelihood(const IntMat& a, const IntVec& y, int n, const Vec& p) {
  const int h = static_cast<int>(a.cols());
  double total = 0.0;
  std::vector<int> seq(n, 0);
  IntVec counts = IntVec::Zero(h);
  std::function<void(int, double)> rec = [&](int j, double w) {
    if (j == n) {
      if ((a * counts - y).isZero(0)) total += w;
      return;
    }
    for (int c = 0; c < h; ++c) {
      counts(c) += 1;
      rec(j + 1, w * p(c));
      counts(c) -= 1;
    }
  };
  rec(0, 1.0);
  return total;
}

inline double log_multinomial_pmf(const IntVec& z, int n, const Vec& p) {
  double acc = std::lgamma(n + 1.0);
  for (int c = 0; c < z.size(); ++c) {
    acc -= std::lgamma(z(c) + 1.0);
    if (z(c) > 0) acc += z(c) * std::log(p(c));
  }
  return acc;
}

inline double log_dirichlet_pdf(const Vec& x, const Vec& alpha) {
  double acc = std::lgamma(alpha.sum());
  for (int i = 0; i < x.size(); ++i) {
    acc -= std::lgamma(alpha(i));
    acc += (alpha(i) - 1.0) * std::log(x(i));
  }
  return acc;
}

// Central finite-difference gradient of f at x.
inline Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& x,
                       double step = 1e-5) {
  Vec g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Vec a = x, b = x;
    a(i) += step;
    b(i) -= step;
    g(i) = (f(a) - f(b)) / (2 * step);
  }
  return g;
}

}  // namespace oracle
