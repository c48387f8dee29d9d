#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poolfreq/types.hpp"

namespace poolfreq {

// Integer kernel moves of a configuration matrix. Adding or subtracting a
// move walks the fiber { z >= 0 : A z = y } without changing y. The
// certification fields record how connectedness was checked.
struct MarkovBasis {
  IntMat moves;           // one move per row, sign-canonical, deduplicated
  int certified_n = 0;    // fiber connectedness verified up to this pool size
  int probe_samples = 0;  // number of random probes when not exhaustive
  bool exhaustive = false;

  int move_count() const { return static_cast<int>(moves.rows()); }
  int haplotype_count() const { return static_cast<int>(moves.cols()); }
};

struct BasisOptions {
  int max_degree = 6;          // cap on the half 1-norm of candidate moves
  int certify_n = 8;           // pool sizes checked during certification
  int certify_haplotypes = 8;  // exhaustive check only when H <= this
  int probe_samples = 50;      // random fiber probes otherwise
  std::uint64_t probe_seed = 1;
  double max_seconds = 300.0;
};

// Builds a basis by degree-by-degree completion: candidate moves are pairs
// of disjoint-support count vectors with equal image under A; degrees are
// added until the connectivity certificate passes.
MarkovBasis compute_markov_basis(const ConfigurationMatrix& m, const BasisOptions& opts = {});

// True when the given fiber is connected under the move set.
bool fiber_connected(const IntMat& moves, const std::vector<LatentCounts>& fiber);

// Checks every achievable fiber for pool sizes 1..n.
bool verify_connectivity(const ConfigurationMatrix& m, const MarkovBasis& basis, int n);

void write_markov_basis(const std::string& path, const MarkovBasis& basis);
MarkovBasis read_markov_basis(const std::string& path);

}  // namespace poolfreq
