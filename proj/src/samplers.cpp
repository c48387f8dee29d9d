#include "poolfreq/samplers.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "poolfreq/errors.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/normal_approx.hpp"
#include "poolfreq/numerics.hpp"
#include "poolfreq/nuts.hpp"
#include "poolfreq/parallel.hpp"
#include "poolfreq/simplex_transform.hpp"

namespace poolfreq {

double log_joint_collapsed(const Dataset& data, const std::vector<LatentCounts>& latents,
                           const DirichletPrior& prior) {
  const int h = static_cast<int>(data.haplotypes.size());
  const double alpha = prior.concentration;
  if (latents.size() != data.pools.size())
    throw InvalidInputError("log_joint_collapsed: one latent vector per pool required");
  long long total_n = 0;
  IntVec totals = IntVec::Zero(h);
  double value = 0.0;
  for (size_t i = 0; i < data.pools.size(); ++i) {
    const auto& pool = data.pools[i];
    if (!latent_is_feasible(pool, latents[i])) return neg_inf;
    value += log_multinomial_coef(pool.size, latents[i]);
    totals += latents[i];
    total_n += pool.size;
  }
  value += std::lgamma(h * alpha) - h * std::lgamma(alpha) -
           std::lgamma(h * alpha + static_cast<double>(total_n));
  for (int c = 0; c < h; ++c) value += std::lgamma(totals(c) + alpha);
  return value;
}

Vec sample_dirichlet_conditional(const std::vector<LatentCounts>& latents, int haplotype_count,
                                 const DirichletPrior& prior, RngEngine& rng) {
  Vec alpha = Vec::Constant(haplotype_count, prior.concentration);
  for (const auto& z : latents) {
    if (z.size() != haplotype_count)
      throw InvalidInputError("sample_dirichlet_conditional: latent length mismatch");
    alpha += z.cast<double>();
  }
  return rand_dirichlet(rng, alpha);
}

namespace {

// (haplotype, signed step) pairs of one basis move.
using MoveSupport = std::vector<std::pair<int, int>>;

std::vector<MoveSupport> build_supports(const IntMat& moves) {
  std::vector<MoveSupport> out(static_cast<size_t>(moves.rows()));
  for (int m = 0; m < moves.rows(); ++m)
    for (int c = 0; c < moves.cols(); ++c)
      if (moves(m, c) != 0) out[static_cast<size_t>(m)].emplace_back(c, moves(m, c));
  return out;
}

// Relative collapsed-joint weight of the neighbor z + delta*u against z,
// holding the other pools' totals fixed. Only support terms change.
template <typename Tables>
double collapsed_rel(const LatentCounts& z, const IntVec& other_totals, const MoveSupport& sup,
                     int delta, const Tables& tab) {
  double acc = 0.0;
  for (const auto& [c, step] : sup) {
    const int dv = delta * step;
    const int zv = z(c);
    const int v = zv + dv;
    if (v < 0) return neg_inf;
    acc += tab.lfact(zv) - tab.lfact(v);
    acc += tab.lgt(other_totals(c) + v) - tab.lgt(other_totals(c) + zv);
  }
  return acc;
}

// Relative multinomial weight with fixed log frequencies.
double fixed_p_rel(const LatentCounts& z, const Vec& logp, const MoveSupport& sup, int delta) {
  double acc = 0.0;
  for (const auto& [c, step] : sup) {
    const int dv = delta * step;
    const int zv = z(c);
    const int v = zv + dv;
    if (v < 0) return neg_inf;
    acc += std::lgamma(zv + 1.0) - std::lgamma(v + 1.0) + dv * logp(c);
  }
  return acc;
}

struct DirectTables {
  double alpha;
  double lfact(int k) const { return std::lgamma(k + 1.0); }
  double lgt(int k) const { return std::lgamma(k + alpha); }
};

struct CachedTables {
  const std::vector<double>* lf;
  const std::vector<double>* lg;
  double lfact(int k) const { return (*lf)[static_cast<size_t>(k)]; }
  double lgt(int k) const { return (*lg)[static_cast<size_t>(k)]; }
};

// Shared proposal skeleton: rel(z, move, delta) scores a neighbor.
template <typename RelFn>
LatentProposal propose_generic(const LatentCounts& z, const std::vector<MoveSupport>& sups,
                               const RelFn& rel, RngEngine& rng) {
  const int b = static_cast<int>(sups.size());
  LatentProposal out;
  if (b == 0) return out;

  Vec relw(2 * b);
  for (int m = 0; m < b; ++m) {
    relw(2 * m) = rel(z, sups[static_cast<size_t>(m)], +1);
    relw(2 * m + 1) = rel(z, sups[static_cast<size_t>(m)], -1);
  }
  const double peak = relw.maxCoeff();
  if (!std::isfinite(peak)) return out;  // no feasible neighbor: stay

  Vec w = (relw.array() - peak).exp();
  const double total = w.sum();
  const int pick = rand_index(rng, w);
  if (relw(pick) == neg_inf) return out;  // rounding fallback hit a zero weight
  const int move = pick / 2;
  const int delta = (pick % 2 == 0) ? +1 : -1;

  out.status = LatentProposal::Status::Proposed;
  out.z_star = z;
  for (const auto& [c, step] : sups[static_cast<size_t>(move)])
    out.z_star(c) += delta * step;
  out.log_target_diff = relw(pick);
  out.forward_logprob = relw(pick) - (peak + std::log(total));

  Vec relw2(2 * b);
  for (int m = 0; m < b; ++m) {
    relw2(2 * m) = rel(out.z_star, sups[static_cast<size_t>(m)], +1);
    relw2(2 * m + 1) = rel(out.z_star, sups[static_cast<size_t>(m)], -1);
  }
  const int back = 2 * move + (delta > 0 ? 1 : 0);
  out.reverse_logprob = relw2(back) - log_sum_exp(relw2);
  return out;
}

}  // namespace

LatentProposal propose_latent_move(const PoolObservation& pool, const LatentCounts& current,
                                   const IntVec& other_totals, const MarkovBasis& basis,
                                   const DirichletPrior& prior, RngEngine& rng) {
  if (!latent_is_feasible(pool, current))
    throw InvalidInputError("propose_latent_move: current latents are infeasible");
  auto sups = build_supports(basis.moves);
  DirectTables tab{prior.concentration};
  return propose_generic(
      current, sups,
      [&](const LatentCounts& z, const MoveSupport& s, int d) {
        return collapsed_rel(z, other_totals, s, d, tab);
      },
      rng);
}

LatentProposal propose_latent_move_fixed_p(const PoolObservation& pool,
                                           const LatentCounts& current, const Vec& logp,
                                           const MarkovBasis& basis, RngEngine& rng) {
  if (!latent_is_feasible(pool, current))
    throw InvalidInputError("propose_latent_move_fixed_p: current latents are infeasible");
  if (logp.size() != current.size())
    throw InvalidInputError("propose_latent_move_fixed_p: logp length mismatch");
  auto sups = build_supports(basis.moves);
  return propose_generic(
      current, sups,
      [&](const LatentCounts& z, const MoveSupport& s, int d) {
        return fixed_p_rel(z, logp, s, d);
      },
      rng);
}

double latent_acceptance(const LatentProposal& proposal) {
  if (proposal.status == LatentProposal::Status::Stay) return 0.0;
  return std::min(
      1.0, std::exp(proposal.log_target_diff + proposal.reverse_logprob -
                    proposal.forward_logprob));
}

FixedFrequencyUpdater::FixedFrequencyUpdater(std::shared_ptr<const MarkovBasis> basis)
    : basis_(std::move(basis)) {
  if (!basis_) throw InvalidInputError("FixedFrequencyUpdater: basis is null");
  supports_ = build_supports(basis_->moves);
}

bool FixedFrequencyUpdater::step(LatentCounts& z, const Vec& logp, RngEngine& rng) const {
  if (logp.size() != z.size())
    throw InvalidInputError("FixedFrequencyUpdater::step: logp length mismatch");
  auto proposal = propose_generic(
      z, supports_,
      [&](const LatentCounts& zz, const MoveSupport& s, int d) {
        return fixed_p_rel(zz, logp, s, d);
      },
      rng);
  if (proposal.status == LatentProposal::Status::Stay) return false;
  if (rand_uniform(rng) >= latent_acceptance(proposal)) return false;
  z = proposal.z_star;
  return true;
}

namespace {

struct PoolSetup {
  std::vector<std::shared_ptr<const MarkovBasis>> bases;       // per pool
  std::vector<std::shared_ptr<std::vector<MoveSupport>>> sups; // per pool
  std::vector<LatentCounts> init;
  std::vector<bool> singleton;
  Vec scan_weights;  // n_i for updatable pools, 0 otherwise
};

PoolSetup prepare_latent_pools(const Dataset& data) {
  PoolSetup s;
  const int n_pools = static_cast<int>(data.pools.size());
  s.bases.resize(n_pools);
  s.sups.resize(n_pools);
  s.init.resize(n_pools);
  s.singleton.assign(n_pools, false);
  s.scan_weights = Vec::Zero(n_pools);

  std::map<const ConfigurationMatrix*,
           std::pair<std::shared_ptr<const MarkovBasis>, std::shared_ptr<std::vector<MoveSupport>>>>
      cache;
  for (int i = 0; i < n_pools; ++i) {
    const auto& pool = data.pools[i];
    auto it = cache.find(pool.matrix.get());
    if (it == cache.end()) {
      auto basis = std::make_shared<MarkovBasis>(compute_markov_basis(*pool.matrix));
      auto sups = std::make_shared<std::vector<MoveSupport>>(build_supports(basis->moves));
      it = cache.emplace(pool.matrix.get(), std::make_pair(basis, sups)).first;
    }
    s.bases[i] = it->second.first;
    s.sups[i] = it->second.second;

    FeasibleSolver solver(pool.matrix, pool.counts, pool.size);
    auto tight = solver.tighten_bounds();
    if (!tight) {
      std::ostringstream msg;
      msg << "pool " << pool.pool_id << " has an empty feasible set";
      throw DataInconsistencyError(msg.str());
    }
    s.singleton[i] = fiber_is_singleton(*tight);
    s.init[i] = s.singleton[i] ? LatentCounts(tight->lower) : *solver.find_first();
    if (!s.singleton[i]) s.scan_weights(i) = pool.size;
  }
  return s;
}

class CollapsedChain {
 public:
  CollapsedChain(const Dataset& data, const DirichletPrior& prior, const PoolSetup& setup)
      : data_(data), setup_(setup), z_(setup.init) {
    const int h = static_cast<int>(data.haplotypes.size());
    totals_ = IntVec::Zero(h);
    int max_n = 0;
    long long total_n = 0;
    for (size_t i = 0; i < data_.pools.size(); ++i) {
      totals_ += z_[i];
      max_n = std::max(max_n, data_.pools[i].size);
      total_n += data_.pools[i].size;
    }
    lfact_.resize(static_cast<size_t>(max_n) + 1);
    for (size_t k = 0; k < lfact_.size(); ++k) lfact_[k] = std::lgamma(static_cast<double>(k) + 1.0);
    lgt_.resize(static_cast<size_t>(total_n) + 1);
    for (size_t k = 0; k < lgt_.size(); ++k)
      lgt_[k] = std::lgamma(static_cast<double>(k) + prior.concentration);
  }

  void update_pool(int i, RngEngine& rng) {
    other_totals_ = totals_ - z_[static_cast<size_t>(i)];
    CachedTables tab{&lfact_, &lgt_};
    auto proposal = propose_generic(
        z_[static_cast<size_t>(i)], *setup_.sups[static_cast<size_t>(i)],
        [&](const LatentCounts& z, const MoveSupport& s, int d) {
          return collapsed_rel(z, other_totals_, s, d, tab);
        },
        rng);
    if (proposal.status == LatentProposal::Status::Stay) {
      bump_rejection();
      return;
    }
    if (rand_uniform(rng) < latent_acceptance(proposal)) {
      totals_ += proposal.z_star - z_[static_cast<size_t>(i)];
      z_[static_cast<size_t>(i)] = proposal.z_star;
      streak_ = 0;
      ++accepted_;
    } else {
      bump_rejection();
    }
    ++proposed_;
  }

  const std::vector<LatentCounts>& latents() const { return z_; }
  std::uint64_t max_streak() const { return max_streak_; }
  std::uint64_t accepted() const { return accepted_; }
  std::uint64_t proposed() const { return proposed_; }

 private:
  void bump_rejection() {
    ++streak_;
    max_streak_ = std::max(max_streak_, streak_);
  }

  const Dataset& data_;
  const PoolSetup& setup_;
  std::vector<LatentCounts> z_;
  IntVec totals_;
  IntVec other_totals_;
  std::vector<double> lfact_, lgt_;
  std::uint64_t streak_ = 0, max_streak_ = 0, accepted_ = 0, proposed_ = 0;
};

void check_dataset(const Dataset& data) {
  if (data.pools.empty()) throw InvalidInputError("dataset has no pools");
  const int h = static_cast<int>(data.haplotypes.size());
  if (h < 2) throw InvalidInputError("dataset needs at least two haplotypes");
  for (const auto& pool : data.pools) {
    if (!pool.matrix) throw InvalidInputError("pool has no configuration matrix");
    if (pool.matrix->haplotype_count() != h)
      throw InvalidInputError("pool matrix disagrees with the haplotype list");
  }
}

std::vector<std::string> haplotype_labels(const Dataset& data) {
  std::vector<std::string> labels;
  labels.reserve(data.haplotypes.size());
  for (const auto& hap : data.haplotypes) labels.push_back(hap.bits);
  return labels;
}

constexpr std::uint64_t kStreamLatent = 1;
constexpr std::uint64_t kStreamExact = 2;
constexpr std::uint64_t kStreamApprox = 3;

}  // namespace

PosteriorDraws run_lc_sampling(const Dataset& data, const DirichletPrior& prior,
                               const SamplerConfig& config) {
  Dataset work = data;
  preprocess_dataset(work);
  check_dataset(work);
  const int h = static_cast<int>(work.haplotypes.size());
  const int n_pools = static_cast<int>(work.pools.size());

  PoolSetup setup = prepare_latent_pools(work);

  long long total_n = 0;
  for (const auto& pool : work.pools) total_n += pool.size;
  const std::uint64_t updates =
      config.latent_updates_per_iter > 0
          ? config.latent_updates_per_iter
          : 5 * static_cast<std::uint64_t>(total_n);
  const bool any_updatable = setup.scan_weights.sum() > 0;

  PosteriorDraws out;
  out.labels = haplotype_labels(work);
  out.freq.resize(static_cast<size_t>(config.chains));
  out.warnings.resize(static_cast<size_t>(config.chains));
  if (config.store_latents)
    out.latents.resize(static_cast<size_t>(config.chains));

  parallel_for(config.chains, config.threads, [&](int c) {
    auto rng = substream(config.seed, {kStreamLatent, static_cast<std::uint64_t>(c)});
    CollapsedChain chain(work, prior, setup);
    Mat draws(config.inference_iters, h);
    std::vector<IntMat> latent_draws;
    if (config.store_latents)
      latent_draws.assign(static_cast<size_t>(n_pools), IntMat(config.inference_iters, h));

    const int total_iters = config.burn_in + config.inference_iters;
    for (int t = 0; t < total_iters; ++t) {
      if (any_updatable) {
        for (std::uint64_t u = 0; u < updates; ++u) {
          const int i = rand_index(rng, setup.scan_weights);
          chain.update_pool(i, rng);
        }
      }
      if (t >= config.burn_in) {
        const int s = t - config.burn_in;
        draws.row(s) = sample_dirichlet_conditional(chain.latents(), h, prior, rng).transpose();
        if (config.store_latents)
          for (int i = 0; i < n_pools; ++i)
            latent_draws[static_cast<size_t>(i)].row(s) =
                chain.latents()[static_cast<size_t>(i)].transpose();
      }
    }

    out.freq[static_cast<size_t>(c)] = std::move(draws);
    if (config.store_latents) out.latents[static_cast<size_t>(c)] = std::move(latent_draws);
    auto& warn = out.warnings[static_cast<size_t>(c)];
    warn.stuck_rejections = chain.max_streak();
    if (chain.max_streak() > 5000)
      warn.messages.push_back("latent proposals rejected " +
                              std::to_string(chain.max_streak()) + " times in a row");
  });
  return out;
}

PosteriorDraws run_marginal_mcmc(const Dataset& data, const DirichletPrior& prior,
                                 const SamplerConfig& config) {
  if (config.method == InferenceMethod::Latent)
    throw InvalidInputError("run_marginal_mcmc: method must be Exact or Approx");
  Dataset work = data;
  // Pruned candidate lists (partition ligation) can leave counts the
  // candidates cannot reproduce; only the normal approximation stays
  // well defined there.
  auto notes = preprocess_dataset(work, config.method == InferenceMethod::Approx
                                            ? ContradictionPolicy::Drop
                                            : ContradictionPolicy::Reject);
  check_dataset(work);
  const int h = static_cast<int>(work.haplotypes.size());
  const int dim = h - 1;
  const int n_pools = static_cast<int>(work.pools.size());
  const double alpha = prior.concentration;

  // Exact method: enumerate every pool's feasible set once, shared
  // read-only across chains.
  std::vector<FeasibleSetLikelihood> exact;
  if (config.method == InferenceMethod::Exact) {
    std::vector<std::optional<FeasibleSetLikelihood>> built(static_cast<size_t>(n_pools));
    parallel_for(n_pools, config.threads, [&](int i) {
      const auto& pool = work.pools[static_cast<size_t>(i)];
      try {
        built[static_cast<size_t>(i)].emplace(enumerate_feasible(pool, config.budget), pool.size);
      } catch (const EnumerationOverflowError& e) {
        throw EnumerationOverflowError(std::string(e.what()) + " for pool " + pool.pool_id +
                                           "; use the approximate or latent method instead",
                                       e.solutions_found);
      }
    });
    exact.reserve(static_cast<size_t>(n_pools));
    for (auto& b : built) exact.push_back(std::move(*b));
  }

  NutsSampler::Target target = [&](const Vec& x, Vec& grad) {
    // log frequencies directly from the chart keeps everything finite.
    Vec full(h);
    full.head(dim) = x;
    full(h - 1) = 0.0;
    const double lse = log_sum_exp(full);
    Vec logp = full.array() - lse;
    Vec p = logp.array().exp();

    double value = alpha * logp.sum();  // Dirichlet prior + chart jacobian
    grad = Vec::Constant(dim, alpha);
    grad -= (alpha * h) * p.head(dim);

    if (config.method == InferenceMethod::Exact) {
      for (int i = 0; i < n_pools; ++i) {
        auto [ll, expected] = exact[static_cast<size_t>(i)].log_likelihood_and_expected(logp);
        value += ll;
        grad += expected.head(dim) -
                static_cast<double>(work.pools[static_cast<size_t>(i)].size) * p.head(dim);
      }
    } else {
      Vec grad_p = Vec::Zero(h);
      for (int i = 0; i < n_pools; ++i) {
        auto [ll, g] = approx_log_likelihood_with_gradient(work.pools[static_cast<size_t>(i)], p,
                                                           config.stabilize_eps);
        value += ll;
        grad_p += g;
      }
      grad += alr_chain_gradient(p, grad_p);
    }
    return value;
  };

  const std::uint64_t stream =
      config.method == InferenceMethod::Exact ? kStreamExact : kStreamApprox;

  PosteriorDraws out;
  out.labels = haplotype_labels(work);
  out.freq.resize(static_cast<size_t>(config.chains));
  out.warnings.resize(static_cast<size_t>(config.chains));
  for (const auto& note : notes)
    out.warnings[0].messages.push_back("preprocessing: " + note);

  parallel_for(config.chains, config.threads, [&](int c) {
    auto rng = substream(config.seed, {stream, static_cast<std::uint64_t>(c)});
    NutsOptions opts;
    opts.max_depth = config.max_tree_depth;
    opts.target_accept = config.target_accept;
    NutsSampler sampler(target, dim, config.burn_in, opts);

    Vec x(dim);
    for (int k = 0; k < dim; ++k) x(k) = 0.1 * rand_normal(rng);
    Mat draws(config.inference_iters, h);
    const int total_iters = config.burn_in + config.inference_iters;
    for (int t = 0; t < total_iters; ++t) {
      x = sampler.step(x, rng);
      if (t >= config.burn_in)
        draws.row(t - config.burn_in) = alr_inverse(x).transpose();
    }
    out.freq[static_cast<size_t>(c)] = std::move(draws);

    auto& warn = out.warnings[static_cast<size_t>(c)];
    const auto& diag = sampler.diagnostics();
    warn.divergences = diag.post_warmup_divergences;
    warn.transitions = diag.post_warmup_transitions;
    warn.numerical_failures = diag.eval_failures;
    if (diag.post_warmup_transitions > 0 &&
        diag.post_warmup_divergences * 20 > diag.post_warmup_transitions)
      warn.messages.push_back("more than 5% of post-warmup transitions diverged");
    if (diag.eval_failures > 0)
      warn.messages.push_back(std::to_string(diag.eval_failures) +
                              " target evaluations failed and were treated as zero density");
  });
  return out;
}

PosteriorDraws run_inference(const Dataset& data, const DirichletPrior& prior,
                             const SamplerConfig& config) {
  if (config.method == InferenceMethod::Latent) return run_lc_sampling(data, prior, config);
  return run_marginal_mcmc(data, prior, config);
}

}  // namespace poolfreq
