#pragma once

#include <string>
#include <utility>
#include <vector>

#include "poolfreq/inference_types.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

// Contiguous [begin, end) marker blocks of the requested size; a trailing
// singleton is merged into its neighbor so every block spans >= 2 markers
// (or all of them when there are fewer).
std::vector<std::pair<int, int>> segment_markers(int marker_count, int block_size);

// Cross product of two partial-haplotype sets by bit concatenation.
std::vector<Haplotype> concatenate_haplotypes(const std::vector<Haplotype>& left,
                                              const std::vector<Haplotype>& right);

// Projects per-marker allele-count data onto the markers [begin, end),
// with the given candidate partial haplotypes as the new column set.
// Requires every pool's matrix to be the allele-count matrix of the
// dataset's haplotypes (an extra sum row is allowed).
Dataset restrict_to_markers(const Dataset& data, int begin, int end,
                            std::vector<Haplotype> candidates);

struct LigationConfig {
  int block_size = 4;        // 3 or 4
  double threshold = 0.01;   // keep partial haplotypes estimated above this
  int max_candidates = 256;  // per-segment cap, lowest estimates pruned
  DirichletPrior prior{0.1};
  SamplerConfig sampler;  // settings for the per-block estimation runs

  LigationConfig() { sampler.method = InferenceMethod::Approx; }
};

struct LigationLevel {
  std::vector<int> kept_sizes;  // per segment, after threshold and cap
  bool cap_applied = false;
};

struct LigationResult {
  std::vector<Haplotype> haplotypes;  // final input-haplotype list
  Vec estimates;                      // point estimates aligned with the list
  std::vector<LigationLevel> levels;
  std::vector<std::string> messages;
};

// Recursive block estimation and concatenation: estimate partial-haplotype
// frequencies per segment, keep those above the threshold, concatenate
// neighboring segments, and repeat until a single list remains. Estimates
// are refreshed at every level before re-thresholding.
LigationResult run_partition_ligation(const Dataset& data, const LigationConfig& config);

}  // namespace poolfreq
