#pragma once

#include <cstdint>
#include <functional>

#include "poolfreq/rng.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

struct NutsOptions {
  int max_depth = 10;
  double target_accept = 0.8;
  double init_step = 0.0;  // 0 = search for a reasonable value on first use
  double divergence_delta = 1000.0;
};

struct NutsDiagnostics {
  std::uint64_t transitions = 0;
  std::uint64_t divergences = 0;
  std::uint64_t post_warmup_transitions = 0;
  std::uint64_t post_warmup_divergences = 0;
  std::uint64_t eval_failures = 0;
  double step_size = 0.0;
  double last_accept_stat = 0.0;
  bool last_divergent = false;
};

// One-transition-at-a-time no-U-turn sampler with dual-averaging step-size
// adaptation and windowed diagonal mass-matrix estimation during warmup.
// The target may change between calls (alternating samplers rely on this);
// evaluations that throw or return non-finite values are treated as
// zero-probability regions and counted.
class NutsSampler {
 public:
  // Returns log density and fills the gradient (same length as the input).
  using Target = std::function<double(const Vec&, Vec&)>;

  NutsSampler(Target target, int dim, int warmup_transitions, NutsOptions opts = {});

  // Runs one trajectory from q and returns the new state. Adapts while the
  // transition count is below the warmup budget, then freezes.
  Vec step(const Vec& q, RngEngine& rng);

  const NutsDiagnostics& diagnostics() const { return diag_; }
  const Vec& inv_mass() const { return inv_mass_; }
  bool adapting() const { return diag_.transitions < static_cast<std::uint64_t>(warmup_); }

 private:
  struct Phase {
    Vec q, r, grad;
    double logp = 0.0, joint = 0.0;
  };
  struct Tree {
    Phase minus, plus;
    Vec proposal;
    double logw = 0.0;
    double sum_accept = 0.0;
    std::uint64_t leaves = 0;
    bool divergent = false;
    bool turning = false;
  };

  double eval(const Vec& q, Vec& grad);
  void leapfrog(Phase& s, double eps);
  double kinetic(const Vec& r) const;
  bool u_turn(const Phase& minus, const Phase& plus) const;
  Tree build_tree(const Phase& from, int dir, int depth, double joint0, RngEngine& rng);
  double find_reasonable_step(const Vec& q, RngEngine& rng);
  void setup_windows();
  void adapt(const Vec& q, double accept_stat, RngEngine& rng);
  void reset_step_adaptation(double eps);

  Target target_;
  int dim_;
  int warmup_;
  NutsOptions opts_;
  NutsDiagnostics diag_;

  Vec inv_mass_;
  double log_eps_ = 0.0, log_eps_bar_ = 0.0, hbar_ = 0.0, mu_ = 0.0;
  std::uint64_t adapt_m_ = 0;
  bool step_initialized_ = false;

  // Warmup windows for mass estimation.
  int window_start_ = 0, window_end_ = 0, window_width_ = 0, term_start_ = 0;
  Vec welford_mean_, welford_m2_;
  std::uint64_t welford_n_ = 0;
};

}  // namespace poolfreq
