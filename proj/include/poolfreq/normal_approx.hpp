#pragma once

#include <utility>
#include <vector>

#include "poolfreq/types.hpp"

namespace poolfreq {

// Moment-matched normal approximation to the observed counts given p, with
// the pool-size row removed (its variance is zero):
//   mean = n A' p
//   cov  = n (A' (diag(p) - p p^T) A'^T + eps I)
struct StabilizedGaussian {
  Vec mean;
  Mat covariance;
  std::vector<int> rows;  // indices of the matrix rows that entered
};

StabilizedGaussian build_stabilized_gaussian(const ConfigurationMatrix& m, int size,
                                             const Vec& p, double eps = 1e-9);

double approx_log_likelihood(const PoolObservation& pool, const Vec& p, double eps = 1e-9);
Vec approx_log_likelihood_gradient(const PoolObservation& pool, const Vec& p, double eps = 1e-9);
std::pair<double, Vec> approx_log_likelihood_with_gradient(const PoolObservation& pool,
                                                           const Vec& p, double eps = 1e-9);

}  // namespace poolfreq
