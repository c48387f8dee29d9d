#pragma once

#include <functional>
#include <vector>

#include "poolfreq/rng.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

struct SharedSim {
  Vec truth;     // frequency vector the pools were drawn from
  Dataset data;  // per-marker allele counts, one matrix shared by all pools
  std::vector<IntVec> latents;
};

// Pools drawn from a single frequency vector: p ~ Dir(conc), per pool
// z ~ Mult(n, p), observed counts y = A z. The haplotype count must be a
// power of two (all haplotypes over log2(H) markers).
SharedSim simulate_shared(int haplotype_count, int pools, int pool_size, double concentration,
                          RngEngine& rng);

// Piecewise-constant relative fitness with smooth sigmoid transitions.
// levels has one more entry than changepoints; changepoints are sorted.
struct SigmoidRate {
  Vec levels;
  Vec changepoints;
  Vec slopes;
  double operator()(double t) const;
};

// Changepoints uniform on the horizon then sorted, transition slopes
// uniform on [0.2, 2], and levels normal with standard deviation inverse
// to the enclosing gap (anchored at 0 and the horizon).
SigmoidRate sample_sigmoid_rate(int sigmoids, double horizon, RngEngine& rng);

struct GridTrajectories {
  Vec grid;            // integration times, fixed step
  Mat log_population;  // grid x H, rescaled to equal per-column medians
  Mat frequencies;     // grid x H, rows on the simplex
  Mat slopes;          // d frequencies / dt on the grid
};

// Integrates per-haplotype exponential growth under the given rates with
// fixed-step fourth-order Runge-Kutta in log coordinates, then rescales
// starting values so the population medians match across haplotypes.
GridTrajectories integrate_relative_growth(const std::vector<std::function<double(double)>>& rates,
                                           double horizon, double step);

struct TimeSeriesSimConfig {
  int markers = 3;
  int sigmoids = 4;
  double horizon = 20.0;
  double step = 0.01;
  std::vector<double> time_points;  // defaults to 0.66 i - 0.23, i = 1..30
  int pool_size = 50;
  double concentration_scale = 200.0;
  int candidate_runs = 100;
  double slope_limit = 1.0;

  TimeSeriesSimConfig();
};

struct TimeSeriesSim {
  GridTrajectories grid;
  Mat frequencies;  // time points x H
  Dataset data;     // pool i carries its time as the single covariate
  std::vector<IntVec> latents;
};

// Appendix-style time series: among candidate growth-rate draws whose
// frequency slopes stay below the limit, keeps the one with the largest
// temporal variation, then draws overdispersed pool counts
// z_i ~ DirMult(n, scale * p(t_i)) and reports y_i = A z_i.
TimeSeriesSim simulate_timeseries(const TimeSeriesSimConfig& config, RngEngine& rng);

}  // namespace poolfreq
