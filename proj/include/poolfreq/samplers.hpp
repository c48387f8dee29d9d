#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "poolfreq/feasible.hpp"
#include "poolfreq/inference_types.hpp"
#include "poolfreq/markov_basis.hpp"
#include "poolfreq/rng.hpp"

namespace poolfreq {

// log p(Y, Z) with the frequency vector integrated out under a symmetric
// Dirichlet prior; -inf when any pool's latent counts are infeasible.
double log_joint_collapsed(const Dataset& data, const std::vector<LatentCounts>& latents,
                           const DirichletPrior& prior);

// p | Y, Z ~ Dirichlet(alpha + column totals of Z).
Vec sample_dirichlet_conditional(const std::vector<LatentCounts>& latents, int haplotype_count,
                                 const DirichletPrior& prior, RngEngine& rng);

struct LatentProposal {
  enum class Status { Proposed, Stay };
  Status status = Status::Stay;
  LatentCounts z_star;
  double forward_logprob = 0.0;  // log q(z_star | z)
  double reverse_logprob = 0.0;  // log q(z | z_star)
  double log_target_diff = 0.0;  // pool/prior terms at z_star minus at z
};

// Locally balanced proposal over the Markov-basis neighborhood of one
// pool's latent counts, weighted by the collapsed joint. `other_totals`
// holds the per-haplotype totals of the remaining pools.
LatentProposal propose_latent_move(const PoolObservation& pool, const LatentCounts& current,
                                   const IntVec& other_totals, const MarkovBasis& basis,
                                   const DirichletPrior& prior, RngEngine& rng);

// Hierarchical variant: neighborhood weighted by Mult(z; n_i, p_i) with the
// pool's own frequency vector fixed (supplied in log space).
LatentProposal propose_latent_move_fixed_p(const PoolObservation& pool,
                                           const LatentCounts& current, const Vec& logp,
                                           const MarkovBasis& basis, RngEngine& rng);

// Metropolis-Hastings acceptance probability for either proposal kind.
double latent_acceptance(const LatentProposal& proposal);

// Repeated fixed-frequency updates of one pool's latent counts. The move
// neighborhood is precomputed once so each step costs only the support of
// the chosen basis; the caller keeps z feasible between calls (the state is
// validated by construction and moves never leave the fiber).
class FixedFrequencyUpdater {
 public:
  explicit FixedFrequencyUpdater(std::shared_ptr<const MarkovBasis> basis);

  // One locally balanced proposal plus acceptance test in place; returns
  // true when z changed. logp holds this pool's log frequencies.
  bool step(LatentCounts& z, const Vec& logp, RngEngine& rng) const;

 private:
  std::shared_ptr<const MarkovBasis> basis_;
  std::vector<std::vector<std::pair<int, int>>> supports_;
};

// Collapsed random-scan sampler: latent updates with pools chosen
// proportional to size, then a Dirichlet conditional draw per iteration.
PosteriorDraws run_lc_sampling(const Dataset& data, const DirichletPrior& prior,
                               const SamplerConfig& config);

// Marginal sampler on the log-ratio chart; method Exact enumerates each
// pool's feasible set up front, method Approx uses the stabilized normal.
PosteriorDraws run_marginal_mcmc(const Dataset& data, const DirichletPrior& prior,
                                 const SamplerConfig& config);

PosteriorDraws run_inference(const Dataset& data, const DirichletPrior& prior,
                             const SamplerConfig& config);

}  // namespace poolfreq
