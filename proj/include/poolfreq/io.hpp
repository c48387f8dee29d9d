#pragma once

#include <string>
#include <vector>

#include "poolfreq/hier_gp.hpp"
#include "poolfreq/inference_types.hpp"
#include "poolfreq/types.hpp"

namespace poolfreq {

// Haplotype list: one 0/1 string per line, '#' starts a comment. Lists must
// be duplicate-free with a common marker count.
std::vector<Haplotype> read_haplotype_list(const std::string& path);
void write_haplotype_list(const std::string& path, const std::vector<Haplotype>& haplotypes);

// Subset design: line r lists the haplotype bit strings contributing to
// observed count r. Returned indices point into `haplotypes`.
std::vector<std::vector<int>> read_subset_design(const std::string& path,
                                                 const std::vector<Haplotype>& haplotypes);
void write_subset_design(const std::string& path, const std::vector<Haplotype>& haplotypes,
                         const std::vector<std::vector<int>>& subsets);

// Pool table: delimited text (tabs, commas or spaces) with a header row.
// Columns `pool_id` and `n` are fixed, columns prefixed `x_` hold covariates
// (the first one is the sampling time), every other column is an observed
// count. Column order within each group is preserved.
struct PoolTable {
  std::vector<std::string> count_names;
  std::vector<std::string> covariate_names;  // including the x_ prefix
  std::vector<std::string> ids;
  std::vector<int> sizes;
  std::vector<IntVec> counts;
  std::vector<std::vector<double>> covariates;

  int pool_count() const { return static_cast<int>(ids.size()); }
};
PoolTable read_pool_table(const std::string& path);

// Writes the dataset's pools with count columns y0..y{R-1}; covariate
// columns are named x_0.. unless `covariate_names` overrides them.
void write_pool_table(const std::string& path, const Dataset& data,
                      const std::vector<std::string>& covariate_names = {});

// Attaches a configuration matrix to the table rows: the per-marker
// allele-count design of `haplotypes` by default, or the subset design when
// `subsets` is nonempty. The matrix carries no sum row; preprocessing adds
// the pool-size constraint from column n.
Dataset assemble_dataset(std::vector<Haplotype> haplotypes, const PoolTable& table,
                         const std::vector<std::vector<int>>& subsets = {});

// True frequencies in long form: pool_id, haplotype, frequency. A single
// shared vector is stored under pool_id "*"; otherwise one block per pool,
// all blocks listing haplotypes in the same order.
struct TruthTable {
  std::vector<std::string> pool_ids;
  std::vector<std::string> labels;
  Mat frequencies;  // pool blocks x haplotypes

  bool shared() const { return pool_ids.size() == 1 && pool_ids[0] == "*"; }
};
TruthTable read_truth_table(const std::string& path);
void write_truth_table(const std::string& path, const TruthTable& table);

// Posterior draws: columns chain, iteration, then one frequency column per
// haplotype bit string; stored latent counts append columns z:<pool>:<bits>.
// Chains are written grouped with 1-based chain and iteration indices.
void write_draws(const std::string& path, const PosteriorDraws& draws,
                 const std::vector<std::string>& pool_ids = {});
PosteriorDraws read_draws(const std::string& path);

// Hierarchical draws split over four files in `dir`: hier_frequencies.tsv
// (pool-major p columns <pool>|<bits>), hier_field.tsv (<bits>|t<j> in the
// state-packing order), hier_hyper.tsv (level, amplitude, timescale per
// haplotype then the noise scale) and hier_times.tsv (pool_id, time).
// Warnings and latent counts are runtime artifacts and are not persisted.
void write_hier_draws(const std::string& dir, const HierDraws& draws,
                      const std::vector<std::string>& pool_ids);
HierDraws read_hier_draws(const std::string& dir);

// Predictive summary: columns t, haplotype, mean, then the equal-tail
// bounds labelled by their percentiles (2.5% and 97.5% at level 0.95).
void write_predictive_table(const std::string& path, const PredictiveSummary& summary,
                            const std::vector<std::string>& labels, double level);

// Feasible-set cache: one solution per row, space separated, so expensive
// enumerations can be reused across runs.
void write_feasible_set(const std::string& path, const std::vector<LatentCounts>& solutions);
std::vector<LatentCounts> read_feasible_set(const std::string& path);

}  // namespace poolfreq
