#pragma once

#include <string>
#include <vector>

#include "poolfreq/inference_types.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

// Total variation distance between two frequency vectors on the same
// support: half the L1 distance.
double tvd(const Vec& a, const Vec& b);

// TVD over the union of two labelled supports; labels missing from one
// side contribute their full mass.
double tvd(const std::vector<std::string>& labels_a, const Vec& a,
           const std::vector<std::string>& labels_b, const Vec& b);

// Rank-normalized split-chain bulk effective sample size. Chains must have
// equal lengths. Constant input (zero variance everywhere) is reported as
// the total draw count.
double ess(const std::vector<Vec>& chains);

// Rank-normalized split-chain potential scale reduction, the larger of the
// bulk and folded statistics. Chains stuck at distinct constants give
// +infinity; a single chain shorter than four draws gives NaN.
double rhat(const std::vector<Vec>& chains);

// Per-column ESS / R-hat over a set of draw matrices (chains x [iters x d]).
Vec ess_by_column(const std::vector<Mat>& chains);
Vec rhat_by_column(const std::vector<Mat>& chains);

// Evenly spaced thinning of each chain down to at most `target` draws.
std::vector<Vec> thin_chain_draws(const std::vector<Vec>& chains, int target);
std::vector<Mat> thin_chain_draws(const std::vector<Mat>& chains, int target);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return lo <= x && x <= hi; }
};

// Equal-tail interval at the given mass from an unsorted sample.
Interval equal_tail_interval(std::vector<double> sample, double level);

struct CoverageTable {
  std::vector<double> levels;
  std::vector<long long> covered;  // per level
  long long total = 0;             // (dataset, haplotype) pairs scored
  double fraction(size_t i) const {
    return total == 0 ? 0.0 : static_cast<double>(covered[i]) / static_cast<double>(total);
  }
};

// Accumulates equal-tail credible-interval coverage over (dataset,
// haplotype) pairs. Haplotypes whose true frequency is zero are skipped.
class CoverageAccumulator {
 public:
  explicit CoverageAccumulator(std::vector<double> levels);
  void add(const PosteriorDraws& draws, const Vec& truth);
  const CoverageTable& table() const { return table_; }

 private:
  CoverageTable table_;
};

CoverageTable credible_coverage(const PosteriorDraws& draws, const Vec& truth,
                                const std::vector<double>& levels);

// Least-squares slope of log(y) on log(x); the scaling exponent of a
// power-law relationship.
double power_law_exponent(const Vec& x, const Vec& y);

}  // namespace poolfreq
