#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolfreq/types.hpp"

namespace poolfreq {

enum class InferenceMethod {
  Exact,     // marginal sampler, exact likelihood via feasible-set enumeration
  Approx,    // marginal sampler, stabilized normal approximation
  Latent,    // collapsed latent-count sampler
};

struct DirichletPrior {
  double concentration = 0.4;
};

struct SamplerConfig {
  InferenceMethod method = InferenceMethod::Latent;
  int chains = 5;
  int burn_in = 500;
  int inference_iters = 500;
  // Latent updates per sweep; 0 means the default 5 * sum(pool sizes).
  std::uint64_t latent_updates_per_iter = 0;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = one per chain
  bool store_latents = false;
  int max_tree_depth = 10;
  double target_accept = 0.8;
  double stabilize_eps = 1e-9;
  EnumerationBudget budget;
};

struct ChainWarnings {
  std::uint64_t divergences = 0;           // post-warmup divergent transitions
  std::uint64_t transitions = 0;           // post-warmup transitions
  std::uint64_t numerical_failures = 0;    // target evaluations that failed
  std::uint64_t stuck_rejections = 0;      // latent proposals rejected in a row, max streak
  std::vector<std::string> messages;
};

// Posterior draws of the frequency vector, stored unthinned per chain.
struct PosteriorDraws {
  std::vector<std::string> labels;           // haplotype bit strings, column order
  std::vector<Mat> freq;                     // per chain: iterations x haplotypes
  // Optional latent counts: latents[chain][pool] is iterations x haplotypes.
  std::vector<std::vector<IntMat>> latents;
  std::vector<ChainWarnings> warnings;

  int chain_count() const { return static_cast<int>(freq.size()); }
  // Posterior mean across all chains and draws.
  Vec mean() const;
};

}  // namespace poolfreq
