#pragma once

#include <memory>
#include <vector>

#include "poolfreq/types.hpp"

namespace poolfreq {

// Per-marker allele-count design: row m counts haplotypes carrying allele 1
// at marker m. Appends the all-ones pool-size row when requested.
ConfigurationMatrix build_allele_count_matrix(const std::vector<Haplotype>& haplotypes,
                                              bool with_sum_row = true);

// General subset design: row r selects the haplotype indices in subsets[r].
ConfigurationMatrix build_subset_matrix(const std::vector<Haplotype>& haplotypes,
                                        const std::vector<std::vector<int>>& subsets,
                                        bool with_sum_row = true);

// Row pattern a haplotype must match: '0', '1' or '?' per marker.
std::vector<int> matching_haplotypes(const std::vector<Haplotype>& haplotypes,
                                     const std::string& pattern);

// What to do with a dropped row whose observed count the kept rows cannot
// reproduce. The exact and latent-count treatments must reject it (no
// assignment of organisms explains the data), while the stabilized normal
// density stays proper for any counts and the contradictory component does
// not depend on the frequencies, so runs over pruned candidate lists may
// drop the row instead.
enum class ContradictionPolicy { Reject, Drop };

// Reduces (A, y) to independent rows. The pool-size row is kept first in
// priority; remaining rows are kept in input order. Dropped rows must be
// rationally consistent with the kept ones or a DataInconsistencyError is
// thrown, unless the policy says to drop them. Sets row_rank on the result.
struct PreprocessResult {
  std::shared_ptr<const ConfigurationMatrix> matrix;
  IntVec counts;
  std::vector<int> kept_rows;          // indices into the input rows (sum row included)
  std::vector<int> contradicted_rows;  // dropped contradictory rows, Drop policy only
};
PreprocessResult preprocess_pool(const ConfigurationMatrix& raw, const IntVec& raw_counts,
                                 int size,
                                 ContradictionPolicy policy = ContradictionPolicy::Reject);

// Preprocesses every pool in place, sharing reduced matrices between pools
// that shared a raw matrix. Returns one note per dropped contradictory row.
std::vector<std::string> preprocess_dataset(
    Dataset& data, ContradictionPolicy policy = ContradictionPolicy::Reject);

}  // namespace poolfreq
