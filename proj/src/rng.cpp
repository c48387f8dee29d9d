#include "poolfreq/rng.hpp"

#include "poolfreq/errors.hpp"

namespace poolfreq {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngEngine substream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = splitmix64(master_seed);
  for (std::uint64_t label : path) state = splitmix64(state ^ splitmix64(label + 1));
  return RngEngine(state);
}

double rand_uniform(RngEngine& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

double rand_normal(RngEngine& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

double rand_gamma(RngEngine& rng, double shape, double scale) {
  if (shape <= 0 || scale <= 0) throw InvalidInputError("rand_gamma: parameters must be positive");
  return std::gamma_distribution<double>(shape, scale)(rng);
}

Vec rand_dirichlet(RngEngine& rng, const Vec& alpha) {
  Vec g(alpha.size());
  for (int i = 0; i < alpha.size(); ++i) g(i) = rand_gamma(rng, alpha(i), 1.0);
  const double s = g.sum();
  if (s <= 0) return Vec::Constant(alpha.size(), 1.0 / alpha.size());
  // Tiny floor keeps downstream log-space code finite.
  return (g / s).cwiseMax(1e-300);
}

IntVec rand_multinomial(RngEngine& rng, int n, const Vec& p) {
  if (n < 0) throw InvalidInputError("rand_multinomial: n must be nonnegative");
  const int h = static_cast<int>(p.size());
  IntVec z = IntVec::Zero(h);
  int remaining = n;
  double mass = p.sum();
  for (int c = 0; c + 1 < h && remaining > 0; ++c) {
    const double q = std::clamp(mass > 0 ? p(c) / mass : 0.0, 0.0, 1.0);
    const int draw = std::binomial_distribution<int>(remaining, q)(rng);
    z(c) = draw;
    remaining -= draw;
    mass -= p(c);
  }
  z(h - 1) += remaining;
  return z;
}

IntVec rand_dirichlet_multinomial(RngEngine& rng, int n, const Vec& alpha) {
  return rand_multinomial(rng, n, rand_dirichlet(rng, alpha));
}

int rand_index(RngEngine& rng, const Vec& weights) {
  const double total = weights.sum();
  if (!(total > 0)) throw InvalidInputError("rand_index: weights must have positive sum");
  double u = rand_uniform(rng) * total;
  for (int i = 0; i < weights.size(); ++i) {
    u -= weights(i);
    if (u <= 0) return i;
  }
  return static_cast<int>(weights.size()) - 1;
}

}  // namespace poolfreq
