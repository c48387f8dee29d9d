#include "poolfreq/hier_gp.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <utility>

#include "poolfreq/diagnostics.hpp"
#include "poolfreq/errors.hpp"
#include "poolfreq/markov_basis.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/normal_approx.hpp"
#include "poolfreq/numerics.hpp"
#include "poolfreq/nuts.hpp"
#include "poolfreq/parallel.hpp"
#include "poolfreq/samplers.hpp"

namespace poolfreq {

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

// Chain RNG streams; disjoint from the flat samplers' labels.
constexpr std::uint64_t kStreamHierLatent = 4;
constexpr std::uint64_t kStreamHierExact = 5;
constexpr std::uint64_t kStreamHierApprox = 6;
constexpr std::uint64_t kStreamPredict = 7;

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvalidInputError(std::string("kernel_matrix: ") + what + " must be positive");
}

// Elementwise rational-quadratic correlation from precomputed (dt^2)/2.
Mat rq_correlation(const Mat& half_sq_dist, double timescale) {
  return (1.0 + half_sq_dist.array() / (timescale * timescale)).inverse().matrix();
}

double log_det_from_llt(const Eigen::LLT<Mat>& llt) {
  double acc = 0.0;
  const auto& l = llt.matrixLLT();
  for (int i = 0; i < l.rows(); ++i) acc += 2.0 * std::log(l(i, i));
  return acc;
}

}  // namespace

double InverseGammaPrior::log_density(double log_value) const {
  return shape * std::log(scale) - std::lgamma(shape) - shape * log_value -
         scale * std::exp(-log_value);
}

double InverseGammaPrior::grad_log_density(double log_value) const {
  return -shape + scale * std::exp(-log_value);
}

Mat kernel_matrix(const Vec& times, double amplitude, double timescale, double noise) {
  check_positive(amplitude, "amplitude");
  check_positive(timescale, "timescale");
  if (!(noise >= 0.0) || !std::isfinite(noise))
    throw InvalidInputError("kernel_matrix: noise must be non-negative");
  const int n = static_cast<int>(times.size());
  Mat half_sq(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double dt = times(i) - times(j);
      half_sq(i, j) = 0.5 * dt * dt;
    }
  Mat out = amplitude * amplitude * rq_correlation(half_sq, timescale);
  out.diagonal().array() += noise * noise;
  return out;
}

Eigen::LLT<Mat> factor_covariance(const Mat& cov, double jitter) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() == Eigen::Success) return llt;
  Mat bumped = cov;
  bumped.diagonal().array() += jitter;
  llt.compute(bumped);
  if (llt.info() == Eigen::Success) return llt;
  throw NumericalError("covariance factorization failed even after adding jitter");
}

int hier_dim(int haplotype_count, int time_count) {
  if (haplotype_count < 2 || time_count < 1)
    throw InvalidInputError("hier_dim: need at least two haplotypes and one time point");
  return haplotype_count * time_count + 3 * haplotype_count;
}

Vec pack_hier_state(const HierState& state) {
  const int h = static_cast<int>(state.field.rows());
  const int n = static_cast<int>(state.field.cols());
  if (state.level.size() != h || state.amplitude.size() != h || state.timescale.size() != h)
    throw InvalidInputError("pack_hier_state: per-haplotype vectors disagree with the field");
  if (std::abs(state.level.sum()) > 1e-8 * (1.0 + state.level.cwiseAbs().maxCoeff()))
    throw InvalidInputError("pack_hier_state: levels must sum to zero");
  for (int k = 0; k < h; ++k) {
    if (!(state.amplitude(k) > 0.0) || !(state.timescale(k) > 0.0))
      throw InvalidInputError("pack_hier_state: amplitudes and timescales must be positive");
  }
  if (!(state.noise > 0.0)) throw InvalidInputError("pack_hier_state: noise must be positive");

  Vec x(hier_dim(h, n));
  Eigen::Map<Mat>(x.data(), h, n) = state.field;
  const int fdim = h * n;
  x.segment(fdim, h - 1) = state.level.head(h - 1);
  x.segment(fdim + h - 1, h) = state.amplitude.array().log();
  x.segment(fdim + 2 * h - 1, h) = state.timescale.array().log();
  x(fdim + 3 * h - 1) = std::log(state.noise);
  return x;
}

HierState unpack_hier_state(const Vec& x, int haplotype_count, int time_count) {
  const int h = haplotype_count;
  const int n = time_count;
  if (x.size() != hier_dim(h, n))
    throw InvalidInputError("unpack_hier_state: state dimension mismatch");
  HierState s;
  s.field = Eigen::Map<const Mat>(x.data(), h, n);
  const int fdim = h * n;
  s.level.resize(h);
  s.level.head(h - 1) = x.segment(fdim, h - 1);
  s.level(h - 1) = -s.level.head(h - 1).sum();
  s.amplitude = x.segment(fdim + h - 1, h).array().exp();
  s.timescale = x.segment(fdim + 2 * h - 1, h).array().exp();
  s.noise = std::exp(x(fdim + 3 * h - 1));
  return s;
}

Mat frequencies_from_field(const Mat& field) {
  const int h = static_cast<int>(field.rows());
  const int n = static_cast<int>(field.cols());
  Mat out(n, h);
  for (int i = 0; i < n; ++i) {
    Vec col = field.col(i);
    Vec p = (col.array() - log_sum_exp(col)).exp();
    out.row(i) = p.transpose();
  }
  return out;
}

HierPosterior::HierPosterior(const Dataset& data, const HierPriors& priors,
                             InferenceMethod method, const EnumerationBudget& budget,
                             double stabilize_eps)
    : data_(data), priors_(priors), method_(method), eps_(stabilize_eps) {
  preprocess_notes_ = preprocess_dataset(data_, method == InferenceMethod::Approx
                                                    ? ContradictionPolicy::Drop
                                                    : ContradictionPolicy::Reject);
  h_ = static_cast<int>(data_.haplotypes.size());
  n_ = static_cast<int>(data_.pools.size());
  if (h_ < 2) throw InvalidInputError("HierPosterior: dataset needs at least two haplotypes");
  if (n_ < 1) throw InvalidInputError("HierPosterior: dataset has no pools");
  if (!(priors_.level_scale > 0.0))
    throw InvalidInputError("HierPosterior: level_scale must be positive");

  times_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    const auto& pool = data_.pools[static_cast<size_t>(i)];
    if (pool.covariates.empty())
      throw InvalidInputError("pool " + pool.pool_id + " has no time covariate");
    times_(i) = pool.covariates.front();
  }
  half_sq_dist_.resize(n_, n_);
  for (int i = 0; i < n_; ++i)
    for (int j = 0; j < n_; ++j) {
      const double dt = times_(i) - times_(j);
      half_sq_dist_(i, j) = 0.5 * dt * dt;
    }

  if (method_ == InferenceMethod::Exact) {
    std::vector<std::optional<FeasibleSetLikelihood>> built(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      const auto& pool = data_.pools[static_cast<size_t>(i)];
      try {
        built[static_cast<size_t>(i)].emplace(enumerate_feasible(pool, budget), pool.size);
      } catch (const EnumerationOverflowError& e) {
        throw EnumerationOverflowError(
            std::string(e.what()) + "; use the approximate or latent variant instead",
            e.solutions_found);
      }
    }
    exact_.reserve(static_cast<size_t>(n_));
    for (auto& b : built) exact_.push_back(std::move(*b));
  }
}

int HierPosterior::dim() const { return hier_dim(h_, n_); }

double HierPosterior::accumulate(const Vec& x, const std::vector<LatentCounts>* latents,
                                 Vec* grad, HierParts* parts) const {
  if (x.size() != dim()) throw InvalidInputError("HierPosterior: state dimension mismatch");
  if (method_ == InferenceMethod::Latent &&
      (!latents || static_cast<int>(latents->size()) != n_))
    throw InvalidInputError("HierPosterior: the latent method needs one count vector per pool");

  if (grad) *grad = Vec::Zero(dim());
  HierParts acc;

  if (method_ == InferenceMethod::Latent) {
    for (int i = 0; i < n_; ++i) {
      if (!latent_is_feasible(data_.pools[static_cast<size_t>(i)],
                              (*latents)[static_cast<size_t>(i)])) {
        acc.likelihood = neg_inf;
        if (parts) *parts = acc;
        return neg_inf;
      }
    }
  }

  const int fdim = h_ * n_;
  Eigen::Map<const Mat> field(x.data(), h_, n_);
  Vec level(h_);
  level.head(h_ - 1) = x.segment(fdim, h_ - 1);
  level(h_ - 1) = -level.head(h_ - 1).sum();
  Vec amp = x.segment(fdim + h_ - 1, h_).array().exp();
  Vec ts = x.segment(fdim + 2 * h_ - 1, h_).array().exp();
  const double log_noise = x(fdim + 3 * h_ - 1);
  const double noise2 = std::exp(2.0 * log_noise);

  Mat gfield = Mat::Zero(h_, n_);
  Vec glevel = Vec::Zero(h_);  // with respect to the completed levels
  Vec gamp = Vec::Zero(h_), gts = Vec::Zero(h_);
  double gnoise = 0.0;

  // GP prior of each field row given its level and kernel.
  for (int h = 0; h < h_; ++h) {
    const double a2 = amp(h) * amp(h);
    Mat corr = rq_correlation(half_sq_dist_, ts(h));
    Mat cov = a2 * corr;
    cov.diagonal().array() += noise2;
    auto llt = factor_covariance(cov, 1e-8 * a2);
    Vec resid = field.row(h).transpose();
    resid.array() -= level(h);
    Vec alpha = llt.solve(resid);
    acc.field_prior +=
        -0.5 * n_ * kLog2Pi - 0.5 * log_det_from_llt(llt) - 0.5 * resid.dot(alpha);
    if (grad) {
      Mat cinv = llt.solve(Mat::Identity(n_, n_));
      const double tr_cinv = cinv.trace();
      gfield.row(h) -= alpha.transpose();
      glevel(h) += alpha.sum();
      gamp(h) += a2 * alpha.dot(corr * alpha) - (n_ - noise2 * tr_cinv);
      Mat dts = a2 * (corr - corr.cwiseProduct(corr));
      gts(h) += alpha.dot(dts * alpha) - cinv.cwiseProduct(dts).sum();
      gnoise += noise2 * (alpha.squaredNorm() - tr_cinv);
    }
  }

  // Degenerate sum-to-zero normal on the levels, evaluated in the
  // (H-1)-dimensional subspace of the free coordinates.
  const double sc2 = priors_.level_scale * priors_.level_scale;
  acc.level_prior = -0.5 * (h_ - 1) * kLog2Pi - (h_ - 1) * std::log(priors_.level_scale) +
                    0.5 * std::log(static_cast<double>(h_)) - level.squaredNorm() / (2.0 * sc2);

  // Inverse-gamma hyperpriors on the log scale.
  for (int h = 0; h < h_; ++h) {
    acc.hyper_prior += priors_.amplitude.log_density(std::log(amp(h))) +
                       priors_.timescale.log_density(std::log(ts(h)));
    if (grad) {
      gamp(h) += priors_.amplitude.grad_log_density(std::log(amp(h)));
      gts(h) += priors_.timescale.grad_log_density(std::log(ts(h)));
    }
  }
  acc.hyper_prior += priors_.noise.log_density(log_noise);
  if (grad) gnoise += priors_.noise.grad_log_density(log_noise);

  // Observation term per pool.
  for (int i = 0; i < n_; ++i) {
    const auto& pool = data_.pools[static_cast<size_t>(i)];
    Vec col = field.col(i);
    const double lse = log_sum_exp(col);
    Vec logp = col.array() - lse;
    Vec p = logp.array().exp();
    const double ni = pool.size;
    if (method_ == InferenceMethod::Latent) {
      const auto& z = (*latents)[static_cast<size_t>(i)];
      Vec zd = z.cast<double>();
      acc.likelihood += log_multinomial_coef(pool.size, z) + zd.dot(col) - ni * lse;
      if (grad) gfield.col(i) += zd - ni * p;
    } else if (method_ == InferenceMethod::Exact) {
      auto [ll, expected] = exact_[static_cast<size_t>(i)].log_likelihood_and_expected(logp);
      acc.likelihood += ll;
      if (grad) gfield.col(i) += expected - ni * p;
    } else {
      auto [ll, gp] = approx_log_likelihood_with_gradient(pool, p, eps_);
      acc.likelihood += ll;
      if (grad) {
        Vec centered = gp.array() - p.dot(gp);
        gfield.col(i) += p.cwiseProduct(centered);
      }
    }
  }

  if (grad) {
    Eigen::Map<Mat>(grad->data(), h_, n_) = gfield;
    for (int k = 0; k < h_ - 1; ++k)
      (*grad)(fdim + k) =
          glevel(k) - glevel(h_ - 1) - (level(k) - level(h_ - 1)) / sc2;
    grad->segment(fdim + h_ - 1, h_) = gamp;
    grad->segment(fdim + 2 * h_ - 1, h_) = gts;
    (*grad)(fdim + 3 * h_ - 1) = gnoise;
  }
  if (parts) *parts = acc;
  return acc.total();
}

double HierPosterior::eval(const Vec& x, Vec& grad,
                           const std::vector<LatentCounts>* latents) const {
  return accumulate(x, latents, &grad, nullptr);
}

HierParts HierPosterior::decompose(const Vec& x,
                                   const std::vector<LatentCounts>* latents) const {
  HierParts parts;
  accumulate(x, latents, nullptr, &parts);
  return parts;
}

Mat HierDraws::mean_frequencies() const {
  if (frequencies.empty() || labels.empty())
    throw InvalidInputError("HierDraws::mean_frequencies: no draws");
  const int h = static_cast<int>(labels.size());
  const int n = static_cast<int>(times.size());
  Vec acc = Vec::Zero(n * h);
  long long rows = 0;
  for (const auto& m : frequencies) {
    acc += m.colwise().sum().transpose();
    rows += m.rows();
  }
  if (rows == 0) throw InvalidInputError("HierDraws::mean_frequencies: no draws");
  acc /= static_cast<double>(rows);
  return Eigen::Map<const Mat>(acc.data(), h, n).transpose();
}

HierDraws run_hier_sampler(const Dataset& data, const HierConfig& config) {
  if (config.chains < 1) throw InvalidInputError("run_hier_sampler: chains must be positive");
  if (config.burn_in < 0 || config.inference_iters < 1)
    throw InvalidInputError("run_hier_sampler: iteration counts must be positive");
  if (config.updates_per_unit < 1)
    throw InvalidInputError("run_hier_sampler: updates_per_unit must be positive");

  HierPosterior post(data, config.priors, config.method, config.budget, config.stabilize_eps);
  const Dataset& work = post.data();
  const int h = post.haplotype_count();
  const int n_pools = post.pool_count();
  const int dim = post.dim();
  const int fdim = h * n_pools;
  const bool latent_method = config.method == InferenceMethod::Latent;

  // Latent machinery: shared bases per distinct matrix, feasible initial
  // counts, and a precomputed updater per pool.
  std::vector<LatentCounts> init;
  std::vector<bool> updatable;
  std::vector<FixedFrequencyUpdater> updaters;
  if (latent_method) {
    init.resize(static_cast<size_t>(n_pools));
    updatable.assign(static_cast<size_t>(n_pools), false);
    updaters.reserve(static_cast<size_t>(n_pools));
    std::map<const ConfigurationMatrix*, std::shared_ptr<const MarkovBasis>> cache;
    for (int i = 0; i < n_pools; ++i) {
      const auto& pool = work.pools[static_cast<size_t>(i)];
      auto it = cache.find(pool.matrix.get());
      if (it == cache.end())
        it = cache
                 .emplace(pool.matrix.get(),
                          std::make_shared<MarkovBasis>(compute_markov_basis(*pool.matrix)))
                 .first;
      updaters.emplace_back(it->second);

      FeasibleSolver solver(pool.matrix, pool.counts, pool.size);
      auto tight = solver.tighten_bounds();
      if (!tight)
        throw DataInconsistencyError("pool " + pool.pool_id + " has an empty feasible set");
      if (fiber_is_singleton(*tight)) {
        init[static_cast<size_t>(i)] = tight->lower;
      } else {
        init[static_cast<size_t>(i)] = *solver.find_first();
        updatable[static_cast<size_t>(i)] = true;
      }
    }
  }

  HierDraws out;
  out.labels.reserve(static_cast<size_t>(h));
  for (const auto& hap : work.haplotypes) out.labels.push_back(hap.bits);
  out.times = post.times();
  out.frequencies.resize(static_cast<size_t>(config.chains));
  out.field.resize(static_cast<size_t>(config.chains));
  out.hyper.resize(static_cast<size_t>(config.chains));
  out.warnings.resize(static_cast<size_t>(config.chains));
  for (const auto& note : post.preprocess_notes())
    out.warnings[0].messages.push_back("preprocessing: " + note);
  if (latent_method && config.store_latents)
    out.latents.resize(static_cast<size_t>(config.chains));

  const std::uint64_t stream = latent_method ? kStreamHierLatent
                               : config.method == InferenceMethod::Exact ? kStreamHierExact
                                                                         : kStreamHierApprox;
  // Initial centers for the log hyperparameters: prior means when defined.
  const auto log_center = [](const InverseGammaPrior& pr) {
    return std::log(pr.scale / std::max(pr.shape - 1.0, 0.5));
  };

  parallel_for(config.chains, config.threads, [&](int c) {
    auto rng = substream(config.seed, {stream, static_cast<std::uint64_t>(c)});
    std::vector<LatentCounts> z = init;
    const std::vector<LatentCounts>* zp = latent_method ? &z : nullptr;
    NutsSampler::Target target = [&post, zp](const Vec& q, Vec& grad) {
      return post.eval(q, grad, zp);
    };
    NutsOptions opts;
    opts.max_depth = config.max_tree_depth;
    opts.target_accept = config.target_accept;
    NutsSampler sampler(target, dim, config.burn_in, opts);

    Vec x(dim);
    for (int k = 0; k < fdim + h - 1; ++k) x(k) = 0.1 * rand_normal(rng);
    for (int k = 0; k < h; ++k) {
      x(fdim + h - 1 + k) = log_center(config.priors.amplitude) + 0.1 * rand_normal(rng);
      x(fdim + 2 * h - 1 + k) = log_center(config.priors.timescale) + 0.1 * rand_normal(rng);
    }
    x(fdim + 3 * h - 1) = log_center(config.priors.noise) + 0.1 * rand_normal(rng);

    Mat freq_draws(config.inference_iters, fdim);
    Mat field_draws(config.inference_iters, fdim);
    Mat hyper_draws(config.inference_iters, 3 * h + 1);
    std::vector<IntMat> latent_draws;
    if (latent_method && config.store_latents)
      latent_draws.assign(static_cast<size_t>(n_pools), IntMat(config.inference_iters, h));

    std::uint64_t streak = 0, max_streak = 0;
    const int total_iters = config.burn_in + config.inference_iters;
    for (int t = 0; t < total_iters; ++t) {
      x = sampler.step(x, rng);
      if (latent_method) {
        Eigen::Map<const Mat> field(x.data(), h, n_pools);
        for (int i = 0; i < n_pools; ++i) {
          if (!updatable[static_cast<size_t>(i)]) continue;
          Vec col = field.col(i);
          Vec logp = col.array() - log_sum_exp(col);
          const long long count =
              static_cast<long long>(config.updates_per_unit) *
              work.pools[static_cast<size_t>(i)].size;
          for (long long u = 0; u < count; ++u) {
            if (updaters[static_cast<size_t>(i)].step(z[static_cast<size_t>(i)], logp, rng)) {
              streak = 0;
            } else {
              ++streak;
              max_streak = std::max(max_streak, streak);
            }
          }
        }
      }
      if (t >= config.burn_in) {
        const int s = t - config.burn_in;
        field_draws.row(s) = x.head(fdim).transpose();
        Eigen::Map<const Mat> field(x.data(), h, n_pools);
        for (int i = 0; i < n_pools; ++i) {
          Vec col = field.col(i);
          Vec p = (col.array() - log_sum_exp(col)).exp();
          freq_draws.row(s).segment(i * h, h) = p.transpose();
        }
        hyper_draws.row(s).head(h - 1) = x.segment(fdim, h - 1).transpose();
        hyper_draws(s, h - 1) = -x.segment(fdim, h - 1).sum();
        hyper_draws.row(s).segment(h, h) =
            x.segment(fdim + h - 1, h).array().exp().matrix().transpose();
        hyper_draws.row(s).segment(2 * h, h) =
            x.segment(fdim + 2 * h - 1, h).array().exp().matrix().transpose();
        hyper_draws(s, 3 * h) = std::exp(x(fdim + 3 * h - 1));
        if (latent_method && config.store_latents)
          for (int i = 0; i < n_pools; ++i)
            latent_draws[static_cast<size_t>(i)].row(s) = z[static_cast<size_t>(i)].transpose();
      }
    }

    out.frequencies[static_cast<size_t>(c)] = std::move(freq_draws);
    out.field[static_cast<size_t>(c)] = std::move(field_draws);
    out.hyper[static_cast<size_t>(c)] = std::move(hyper_draws);
    if (latent_method && config.store_latents)
      out.latents[static_cast<size_t>(c)] = std::move(latent_draws);

    auto& warn = out.warnings[static_cast<size_t>(c)];
    const auto& diag = sampler.diagnostics();
    warn.divergences = diag.post_warmup_divergences;
    warn.transitions = diag.post_warmup_transitions;
    warn.numerical_failures = diag.eval_failures;
    warn.stuck_rejections = max_streak;
    if (diag.post_warmup_transitions > 0 &&
        diag.post_warmup_divergences * 20 > diag.post_warmup_transitions)
      warn.messages.push_back("more than 5% of post-warmup transitions diverged");
    if (diag.eval_failures > 0)
      warn.messages.push_back(std::to_string(diag.eval_failures) +
                              " target evaluations failed and were treated as zero density");
    if (max_streak > 5000)
      warn.messages.push_back("latent proposals rejected " + std::to_string(max_streak) +
                              " times in a row");
  });
  return out;
}

namespace {

// One level/amplitude/timescale of a stored hyper row.
struct HyperRow {
  Vec level, amplitude, timescale;
  double noise = 0.0;
};

HyperRow split_hyper_row(const Vec& row, int h) {
  HyperRow out;
  out.level = row.head(h);
  out.amplitude = row.segment(h, h);
  out.timescale = row.segment(2 * h, h);
  out.noise = row(3 * h);
  return out;
}

Vec rq_cross(const Vec& times, double amplitude, double timescale, double new_time) {
  const double a2 = amplitude * amplitude;
  Vec k(times.size());
  for (int i = 0; i < times.size(); ++i) {
    const double dt = times(i) - new_time;
    k(i) = a2 / (1.0 + 0.5 * dt * dt / (timescale * timescale));
  }
  return k;
}

}  // namespace

GPConditional gp_conditional(const Vec& times, const Vec& field_values, double level,
                             double amplitude, double timescale, double noise,
                             double new_time) {
  if (times.size() != field_values.size())
    throw InvalidInputError("gp_conditional: times and field values disagree");
  if (times.size() == 0) throw InvalidInputError("gp_conditional: no conditioning points");
  Mat cov = kernel_matrix(times, amplitude, timescale, noise);
  auto llt = factor_covariance(cov, 1e-8 * amplitude * amplitude);
  Vec resid = field_values;
  resid.array() -= level;
  Vec k = rq_cross(times, amplitude, timescale, new_time);
  Vec solved = llt.solve(k);
  GPConditional out;
  out.mean = level + k.dot(llt.solve(resid));
  out.var = std::max(0.0, amplitude * amplitude + noise * noise - k.dot(solved));
  return out;
}

Mat posterior_predict(const HierDraws& draws, const Vec& new_times, std::uint64_t seed) {
  const int h = static_cast<int>(draws.labels.size());
  const int n = static_cast<int>(draws.times.size());
  const int m = static_cast<int>(new_times.size());
  if (h < 2 || n < 1) throw InvalidInputError("posterior_predict: draws are empty");
  if (m < 1) throw InvalidInputError("posterior_predict: no prediction times");
  if (draws.field.size() != draws.hyper.size() || draws.field.empty())
    throw InvalidInputError("posterior_predict: draws lack stored fields or hyperparameters");

  long long total_rows = 0;
  for (size_t c = 0; c < draws.field.size(); ++c) {
    if (draws.field[c].cols() != h * n || draws.hyper[c].cols() != 3 * h + 1 ||
        draws.field[c].rows() != draws.hyper[c].rows())
      throw InvalidInputError("posterior_predict: stored draw shapes are inconsistent");
    total_rows += draws.field[c].rows();
  }
  if (total_rows == 0) throw InvalidInputError("posterior_predict: no retained draws");

  Mat out(total_rows, m * h);
  auto rng = substream(seed, {kStreamPredict, 0});
  Mat fstar(h, m);
  long long row = 0;
  for (size_t c = 0; c < draws.field.size(); ++c) {
    for (int s = 0; s < draws.field[c].rows(); ++s, ++row) {
      Vec field_row = draws.field[c].row(s).transpose();
      Eigen::Map<const Mat> field(field_row.data(), h, n);
      const HyperRow hy = split_hyper_row(draws.hyper[c].row(s).transpose(), h);
      for (int k = 0; k < h; ++k) {
        Mat cov = kernel_matrix(draws.times, hy.amplitude(k), hy.timescale(k), hy.noise);
        auto llt = factor_covariance(cov, 1e-8 * hy.amplitude(k) * hy.amplitude(k));
        Vec resid = field.row(k).transpose();
        resid.array() -= hy.level(k);
        Vec alpha = llt.solve(resid);
        const double marginal =
            hy.amplitude(k) * hy.amplitude(k) + hy.noise * hy.noise;
        for (int j = 0; j < m; ++j) {
          Vec cross = rq_cross(draws.times, hy.amplitude(k), hy.timescale(k), new_times(j));
          const double mean = hy.level(k) + cross.dot(alpha);
          const double var = std::max(0.0, marginal - cross.dot(llt.solve(cross)));
          fstar(k, j) = mean + std::sqrt(var) * rand_normal(rng);
        }
      }
      for (int j = 0; j < m; ++j) {
        Vec col = fstar.col(j);
        Vec p = (col.array() - log_sum_exp(col)).exp();
        out.row(row).segment(j * h, h) = p.transpose();
      }
    }
  }
  return out;
}

PredictiveSummary summarize_predictive(const HierDraws& draws, const Vec& new_times,
                                       std::uint64_t seed, double level) {
  Mat pred = posterior_predict(draws, new_times, seed);
  const int h = static_cast<int>(draws.labels.size());
  const int m = static_cast<int>(new_times.size());
  PredictiveSummary out;
  out.times = new_times;
  out.mean.resize(m, h);
  out.lower.resize(m, h);
  out.upper.resize(m, h);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < h; ++k) {
      Vec col = pred.col(j * h + k);
      out.mean(j, k) = col.mean();
      auto interval =
          equal_tail_interval(std::vector<double>(col.data(), col.data() + col.size()), level);
      out.lower(j, k) = interval.lo;
      out.upper(j, k) = interval.hi;
    }
  return out;
}

}  // namespace poolfreq
