#include "poolfreq/nuts.hpp"

#include <cmath>

#include "poolfreq/errors.hpp"
#include "poolfreq/numerics.hpp"

namespace poolfreq {

NutsSampler::NutsSampler(Target target, int dim, int warmup_transitions, NutsOptions opts)
    : target_(std::move(target)), dim_(dim), warmup_(warmup_transitions), opts_(opts) {
  if (dim_ < 1) throw InvalidInputError("NutsSampler: dimension must be positive");
  inv_mass_ = Vec::Ones(dim_);
  welford_mean_ = Vec::Zero(dim_);
  welford_m2_ = Vec::Zero(dim_);
  setup_windows();
}

void NutsSampler::setup_windows() {
  // Stan-style schedule: fast start, doubling slow windows, fast tail.
  int init_buffer = 75, term_buffer = 50, base_window = 25;
  if (init_buffer + base_window + term_buffer > warmup_) {
    init_buffer = static_cast<int>(0.15 * warmup_);
    term_buffer = static_cast<int>(0.10 * warmup_);
    base_window = warmup_ - init_buffer - term_buffer;
  }
  if (base_window < 2) {
    // Too short for mass estimation; adapt step size only.
    window_start_ = warmup_;
    window_end_ = warmup_;
    term_start_ = warmup_;
    window_width_ = 0;
    return;
  }
  window_start_ = init_buffer;
  window_width_ = base_window;
  term_start_ = warmup_ - term_buffer;
  window_end_ = window_start_ + window_width_;
  if (window_end_ + 2 * window_width_ > term_start_) window_end_ = term_start_;
}

double NutsSampler::eval(const Vec& q, Vec& grad) {
  double value;
  try {
    value = target_(q, grad);
  } catch (const std::exception&) {
    ++diag_.eval_failures;
    grad.setZero();
    return neg_inf;
  }
  if (!std::isfinite(value)) {
    if (std::isnan(value)) ++diag_.eval_failures;
    grad.setZero();
    return neg_inf;
  }
  if (!grad.allFinite()) {
    ++diag_.eval_failures;
    grad.setZero();
    return neg_inf;
  }
  return value;
}

double NutsSampler::kinetic(const Vec& r) const {
  return 0.5 * (r.array().square() * inv_mass_.array()).sum();
}

void NutsSampler::leapfrog(Phase& s, double eps) {
  s.r += 0.5 * eps * s.grad;
  s.q.array() += eps * inv_mass_.array() * s.r.array();
  s.logp = eval(s.q, s.grad);
  s.r += 0.5 * eps * s.grad;
  s.joint = s.logp - kinetic(s.r);
}

bool NutsSampler::u_turn(const Phase& minus, const Phase& plus) const {
  Vec dq = plus.q - minus.q;
  const double a = dq.dot((inv_mass_.array() * minus.r.array()).matrix());
  const double b = dq.dot((inv_mass_.array() * plus.r.array()).matrix());
  return a < 0 || b < 0;
}

NutsSampler::Tree NutsSampler::build_tree(const Phase& from, int dir, int depth, double joint0,
                                          RngEngine& rng) {
  if (depth == 0) {
    Phase s = from;
    leapfrog(s, dir * std::exp(log_eps_));
    Tree t;
    t.minus = s;
    t.plus = s;
    t.proposal = s.q;
    t.leaves = 1;
    const double dh = s.joint - joint0;
    t.divergent = !(dh > -opts_.divergence_delta);  // NaN counts as divergent
    t.logw = t.divergent ? neg_inf : dh;
    t.sum_accept = std::isfinite(dh) ? std::min(1.0, std::exp(dh)) : 0.0;
    return t;
  }
  Tree inner = build_tree(from, dir, depth - 1, joint0, rng);
  if (inner.divergent || inner.turning) return inner;
  Tree outer = build_tree(dir > 0 ? inner.plus : inner.minus, dir, depth - 1, joint0, rng);
  Tree t;
  t.minus = dir > 0 ? inner.minus : outer.minus;
  t.plus = dir > 0 ? outer.plus : inner.plus;
  t.logw = log_sum_exp(inner.logw, outer.logw);
  // Unbiased multinomial choice between the halves.
  const double p_outer =
      std::isfinite(outer.logw) ? std::exp(outer.logw - t.logw) : 0.0;
  t.proposal = (rand_uniform(rng) < p_outer) ? outer.proposal : inner.proposal;
  t.sum_accept = inner.sum_accept + outer.sum_accept;
  t.leaves = inner.leaves + outer.leaves;
  t.divergent = outer.divergent;
  t.turning = outer.turning || u_turn(t.minus, t.plus);
  return t;
}

double NutsSampler::find_reasonable_step(const Vec& q, RngEngine& rng) {
  Phase s;
  s.q = q;
  s.grad.resize(dim_);
  s.logp = eval(s.q, s.grad);
  if (!std::isfinite(s.logp))
    throw NumericalError("step-size search started outside the support");
  double eps = 1.0;
  s.r.resize(dim_);
  for (int i = 0; i < dim_; ++i) s.r(i) = rand_normal(rng) / std::sqrt(inv_mass_(i));
  const double joint0 = s.logp - kinetic(s.r);
  auto ratio_at = [&](double e) {
    Phase trial = s;
    leapfrog(trial, e);
    return trial.joint - joint0;
  };
  double dh = ratio_at(eps);
  const double dir = (dh > std::log(0.5)) ? 1.0 : -1.0;
  for (int iter = 0; iter < 100; ++iter) {
    eps *= std::pow(2.0, dir);
    dh = ratio_at(eps);
    if (dir > 0 ? (dh <= std::log(0.5)) : (dh >= std::log(0.5))) break;
    if (eps > 1e7 || eps < 1e-10) break;
  }
  return eps;
}

void NutsSampler::reset_step_adaptation(double eps) {
  log_eps_ = std::log(eps);
  log_eps_bar_ = 0.0;
  hbar_ = 0.0;
  mu_ = std::log(10.0 * eps);
  adapt_m_ = 0;
}

void NutsSampler::adapt(const Vec& q, double accept_stat, RngEngine& rng) {
  // Dual averaging (gamma 0.05, t0 10, kappa 0.75).
  constexpr double gamma = 0.05, t0 = 10.0, kappa = 0.75;
  ++adapt_m_;
  const double m = static_cast<double>(adapt_m_);
  hbar_ = (1.0 - 1.0 / (m + t0)) * hbar_ + (opts_.target_accept - accept_stat) / (m + t0);
  log_eps_ = mu_ - std::sqrt(m) / gamma * hbar_;
  const double eta = std::pow(m, -kappa);
  log_eps_bar_ = eta * log_eps_ + (1.0 - eta) * log_eps_bar_;

  const int t = static_cast<int>(diag_.transitions);  // 1-based after increment
  if (t > window_start_ && t <= term_start_ && window_width_ > 0) {
    ++welford_n_;
    Vec delta = q - welford_mean_;
    welford_mean_ += delta / static_cast<double>(welford_n_);
    welford_m2_ += delta.cwiseProduct(q - welford_mean_);
    if (t == window_end_) {
      const double n = static_cast<double>(welford_n_);
      if (welford_n_ >= 2) {
        Vec var = welford_m2_ / (n - 1.0);
        inv_mass_ = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      }
      welford_mean_.setZero();
      welford_m2_.setZero();
      welford_n_ = 0;
      window_width_ *= 2;
      window_end_ += window_width_;
      if (window_end_ + 2 * window_width_ > term_start_) window_end_ = term_start_;
      reset_step_adaptation(find_reasonable_step(q, rng));
    }
  }

  if (diag_.transitions == static_cast<std::uint64_t>(warmup_)) {
    log_eps_ = log_eps_bar_;  // freeze
  }
}

Vec NutsSampler::step(const Vec& q, RngEngine& rng) {
  if (q.size() != dim_) throw InvalidInputError("NutsSampler::step: dimension mismatch");
  if (!step_initialized_) {
    reset_step_adaptation(opts_.init_step > 0 ? opts_.init_step : find_reasonable_step(q, rng));
    step_initialized_ = true;
  }

  Phase current;
  current.q = q;
  current.grad.resize(dim_);
  current.logp = eval(current.q, current.grad);
  if (!std::isfinite(current.logp))
    throw NumericalError("NutsSampler: current state has zero posterior density");
  current.r.resize(dim_);
  for (int i = 0; i < dim_; ++i) current.r(i) = rand_normal(rng) / std::sqrt(inv_mass_(i));
  current.joint = current.logp - kinetic(current.r);
  const double joint0 = current.joint;

  Tree tree;
  tree.minus = current;
  tree.plus = current;
  tree.proposal = current.q;
  tree.logw = 0.0;
  tree.sum_accept = 0.0;
  tree.leaves = 0;
  bool divergent = false;

  for (int depth = 0; depth < opts_.max_depth; ++depth) {
    const int dir = rand_uniform(rng) < 0.5 ? -1 : 1;
    Tree sub = build_tree(dir > 0 ? tree.plus : tree.minus, dir, depth, joint0, rng);
    tree.sum_accept += sub.sum_accept;
    tree.leaves += sub.leaves;
    if (sub.divergent) divergent = true;
    if (sub.divergent || sub.turning) break;
    // Biased progressive sampling favours the fresh subtree.
    const double accept_prob = std::min(1.0, std::exp(sub.logw - tree.logw));
    if (rand_uniform(rng) < accept_prob) tree.proposal = sub.proposal;
    if (dir > 0) tree.plus = sub.plus;
    else tree.minus = sub.minus;
    tree.logw = log_sum_exp(tree.logw, sub.logw);
    if (u_turn(tree.minus, tree.plus)) break;
  }

  ++diag_.transitions;
  const bool in_warmup = diag_.transitions <= static_cast<std::uint64_t>(warmup_);
  if (divergent) ++diag_.divergences;
  if (!in_warmup) {
    ++diag_.post_warmup_transitions;
    if (divergent) ++diag_.post_warmup_divergences;
  }
  diag_.last_divergent = divergent;
  diag_.last_accept_stat =
      tree.leaves > 0 ? tree.sum_accept / static_cast<double>(tree.leaves) : 0.0;

  if (in_warmup) adapt(tree.proposal, diag_.last_accept_stat, rng);
  diag_.step_size = std::exp(log_eps_);
  return tree.proposal;
}

}  // namespace poolfreq
