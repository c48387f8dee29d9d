#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "poolfreq/types.hpp"

namespace poolfreq {

using RngEngine = std::mt19937_64;

// Deterministic named substream of a master seed. Components take
// disjoint label paths (chain index, pool index, purpose tag, ...) so no
// two consumers share a stream.
RngEngine substream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path);

double rand_uniform(RngEngine& rng);  // [0, 1)
double rand_normal(RngEngine& rng);
double rand_gamma(RngEngine& rng, double shape, double scale = 1.0);
Vec rand_dirichlet(RngEngine& rng, const Vec& alpha);
IntVec rand_multinomial(RngEngine& rng, int n, const Vec& p);
IntVec rand_dirichlet_multinomial(RngEngine& rng, int n, const Vec& alpha);
// Categorical index proportional to nonnegative weights.
int rand_index(RngEngine& rng, const Vec& weights);

}  // namespace poolfreq
