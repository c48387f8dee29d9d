#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "poolfreq/feasible.hpp"
#include "poolfreq/inference_types.hpp"
#include "poolfreq/rng.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

// Inverse-gamma prior with shape/scale parameters, evaluated on the log
// scale of the variable (the change-of-variables term is included).
struct InverseGammaPrior {
  double shape = 3.0;
  double scale = 1.0;

  double log_density(double log_value) const;
  double grad_log_density(double log_value) const;
};

// Hyperpriors of the hierarchical model. The per-haplotype levels carry a
// degenerate normal prior restricted to the sum-to-zero subspace with
// marginal scale level_scale; amplitude and timescale are per haplotype,
// the white-noise scale is shared.
struct HierPriors {
  double level_scale = 2.0;
  InverseGammaPrior amplitude{3.0, 3.0};
  InverseGammaPrior timescale{3.0, 5.0};
  InverseGammaPrior noise{3.0, 1.0};
};

// Rational-quadratic covariance over the time points plus white noise on
// the diagonal: amplitude^2 (1 + dt^2/(2 timescale^2))^-1 + noise^2 1(i=j).
Mat kernel_matrix(const Vec& times, double amplitude, double timescale, double noise);

// Cholesky factorization with a single retry after adding jitter to the
// diagonal; throws NumericalError when the retry fails as well.
Eigen::LLT<Mat> factor_covariance(const Mat& cov, double jitter);

// Natural-scale state of the hierarchical sampler.
struct HierState {
  Mat field;      // haplotypes x times, latent values before the softmax
  Vec level;      // per-haplotype mean, sums to zero
  Vec amplitude;  // per haplotype, positive
  Vec timescale;  // per haplotype, positive
  double noise = 0.0;
};

// Unconstrained packing: the field column by column (haplotype varying
// fastest), the first H-1 levels (the last is their negated sum), then the
// log amplitudes, log timescales and the shared log noise.
int hier_dim(int haplotype_count, int time_count);
Vec pack_hier_state(const HierState& state);
HierState unpack_hier_state(const Vec& x, int haplotype_count, int time_count);

// Softmax across haplotypes of every field column; one row per time point.
Mat frequencies_from_field(const Mat& field);

struct HierParts {
  double field_prior = 0.0;  // GP log-densities of the field rows
  double level_prior = 0.0;  // sum-to-zero normal on the levels
  double hyper_prior = 0.0;  // inverse-gamma terms on the log scale
  double likelihood = 0.0;

  double total() const { return field_prior + level_prior + hyper_prior + likelihood; }
};

// Log posterior density (up to a constant) of the hierarchical model on the
// unconstrained scale, with analytic gradient. The likelihood term follows
// the method: Latent conditions on supplied counts, Exact sums each pool's
// enumerated feasible set, Approx uses the stabilized normal density.
class HierPosterior {
 public:
  HierPosterior(const Dataset& data, const HierPriors& priors, InferenceMethod method,
                const EnumerationBudget& budget = {}, double stabilize_eps = 1e-9);

  int haplotype_count() const { return h_; }
  int pool_count() const { return n_; }
  int dim() const;
  const Vec& times() const { return times_; }
  const Dataset& data() const { return data_; }
  InferenceMethod method() const { return method_; }
  // Count rows preprocessing dropped as contradictory (Approx method only).
  const std::vector<std::string>& preprocess_notes() const { return preprocess_notes_; }

  // latents are required for the Latent method and ignored otherwise;
  // infeasible latents give -inf.
  double eval(const Vec& x, Vec& grad, const std::vector<LatentCounts>* latents = nullptr) const;
  HierParts decompose(const Vec& x, const std::vector<LatentCounts>* latents = nullptr) const;

 private:
  double accumulate(const Vec& x, const std::vector<LatentCounts>* latents, Vec* grad,
                    HierParts* parts) const;

  Dataset data_;
  HierPriors priors_;
  InferenceMethod method_;
  std::vector<std::string> preprocess_notes_;
  double eps_;
  int h_ = 0;
  int n_ = 0;
  Vec times_;
  Mat half_sq_dist_;  // (t_i - t_j)^2 / 2
  std::vector<FeasibleSetLikelihood> exact_;
};

struct HierConfig {
  InferenceMethod method = InferenceMethod::Latent;
  int chains = 4;
  int burn_in = 1000;
  int inference_iters = 1000;
  // Latent updates per pool per outer iteration = updates_per_unit * size.
  int updates_per_unit = 10;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = one per chain
  bool store_latents = false;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  double stabilize_eps = 1e-9;
  EnumerationBudget budget;
  HierPriors priors;
};

// Draws from the hierarchical sampler. Frequency rows are pool-major
// (haplotype varying fastest); field rows use the pack_hier_state layout;
// hyper rows hold levels, amplitudes, timescales, then the noise scale,
// all on the natural scale.
struct HierDraws {
  std::vector<std::string> labels;
  Vec times;
  std::vector<Mat> frequencies;              // per chain: draws x (pools * haplotypes)
  std::vector<Mat> field;                    // per chain: draws x (haplotypes * times)
  std::vector<Mat> hyper;                    // per chain: draws x (3 * haplotypes + 1)
  std::vector<std::vector<IntMat>> latents;  // [chain][pool]: draws x haplotypes
  std::vector<ChainWarnings> warnings;

  int chain_count() const { return static_cast<int>(frequencies.size()); }
  // Posterior mean per pool and haplotype across all chains and draws.
  Mat mean_frequencies() const;
};

// Alternates one no-U-turn trajectory on (field, levels, hyperparameters)
// with, for the Latent method, a fixed-frequency sweep over every pool's
// latent counts. Exact and Approx marginalize the counts inside the
// trajectory target instead.
HierDraws run_hier_sampler(const Dataset& data, const HierConfig& config);

// Mean and variance of one haplotype's field at a new time, conditional on
// its observed-time values and hyperparameters. The cross covariance omits
// the white-noise term; the marginal variance includes it.
struct GPConditional {
  double mean = 0.0;
  double var = 0.0;
};
GPConditional gp_conditional(const Vec& times, const Vec& field_values, double level,
                             double amplitude, double timescale, double noise, double new_time);

// Predictive frequency draws at the new times: one row per retained draw
// (chains concatenated), columns time-major with haplotype varying fastest.
Mat posterior_predict(const HierDraws& draws, const Vec& new_times, std::uint64_t seed);

// Per time point and haplotype: predictive mean and equal-tailed interval.
struct PredictiveSummary {
  Vec times;
  Mat mean;   // times x haplotypes
  Mat lower;
  Mat upper;
};
PredictiveSummary summarize_predictive(const HierDraws& draws, const Vec& new_times,
                                       std::uint64_t seed, double level = 0.95);

}  // namespace poolfreq
