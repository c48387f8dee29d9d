#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "poolfreq/types.hpp"

namespace poolfreq {

struct VariableBounds {
  IntVec lower;
  IntVec upper;
};

// Per-haplotype search box: l_h = 0 and
// u_h = min_r ( a_rh y_r + (1 - a_rh)(n - y_r) ).
VariableBounds preliminary_bounds(const ConfigurationMatrix& m, const IntVec& y, int size);

// Depth-first enumeration of { z >= 0 integer : A z = y } with running
// budget and surplus pruning. Branches over a set of free columns in fixed
// column order; the remaining rank-many independent columns are solved
// exactly through an integer inverse at the leaves.
class FeasibleSolver {
 public:
  FeasibleSolver(std::shared_ptr<const ConfigurationMatrix> matrix, IntVec counts, int size);

  std::vector<LatentCounts> enumerate(const EnumerationBudget& budget = {}) const;
  std::vector<LatentCounts> enumerate(const VariableBounds& bounds,
                                      const EnumerationBudget& budget) const;

  std::optional<LatentCounts> find_first() const;
  std::optional<LatentCounts> find_first(const VariableBounds& bounds) const;

  // Componentwise-exact bounds over the feasible set via bisection on
  // find_first; nullopt when the set is empty. Marks singleton fibers.
  std::optional<VariableBounds> tighten_bounds() const;

  const VariableBounds& box() const { return box_; }
  int size() const { return size_; }

 private:
  struct SearchState;
  bool search(const VariableBounds& bounds, SearchState& state) const;

  std::shared_ptr<const ConfigurationMatrix> matrix_;
  IntVec counts_;
  int size_ = 0;
  VariableBounds box_;
  std::vector<int> free_cols_, tail_cols_;
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> tail_adjugate_;
  long long tail_det_ = 1;
};

std::vector<LatentCounts> enumerate_feasible(const PoolObservation& pool,
                                             const EnumerationBudget& budget = {});
std::optional<LatentCounts> find_initial_latents(const PoolObservation& pool);
std::optional<VariableBounds> tighten_bounds(const PoolObservation& pool);
bool fiber_is_singleton(const VariableBounds& tightened);

// Exact observed-data likelihood evaluated over a pre-enumerated feasible
// set: log p(y | p) = logsumexp over solutions of the multinomial term.
class FeasibleSetLikelihood {
 public:
  FeasibleSetLikelihood(const std::vector<LatentCounts>& solutions, int size);

  int solution_count() const { return static_cast<int>(z_.rows()); }
  int haplotype_count() const { return static_cast<int>(z_.cols()); }

  // Handles boundary p (entries equal to zero) exactly.
  double log_likelihood(const Vec& p) const;
  // Fast path: caller supplies finite log p.
  double log_likelihood_logp(const Vec& logp) const;
  // Value plus posterior expectation E[z | y, p]; requires finite log p.
  std::pair<double, Vec> log_likelihood_and_expected(const Vec& logp) const;

  const Mat& solutions() const { return z_; }

 private:
  Mat z_;        // solutions x haplotypes
  Vec logcoef_;  // log multinomial coefficient per solution
};

double exact_log_likelihood(const PoolObservation& pool, const Vec& p,
                            const EnumerationBudget& budget = {});
// d/dp_h log p(y|p) = E[z_h | y, p] / p_h; requires strictly interior p.
Vec exact_log_likelihood_gradient(const PoolObservation& pool, const Vec& p,
                                  const EnumerationBudget& budget = {});

void write_feasible_cache(const std::string& path, const std::vector<LatentCounts>& solutions);
std::vector<LatentCounts> read_feasible_cache(const std::string& path);

}  // namespace poolfreq
