#include "poolfreq/model_core.hpp"

#include <map>
#include <sstream>

#include "poolfreq/errors.hpp"
#include "poolfreq/exact_linalg.hpp"

namespace poolfreq {

namespace {

void check_haplotypes(const std::vector<Haplotype>& haplotypes) {
  if (haplotypes.empty()) throw InvalidInputError("haplotype list is empty");
  const int m = haplotypes.front().marker_count();
  for (const auto& h : haplotypes)
    if (h.marker_count() != m)
      throw InvalidInputError("haplotypes differ in marker count");
}

void finalize(ConfigurationMatrix& cm, bool with_sum_row) {
  if (with_sum_row) {
    cm.entries.conservativeResize(cm.entries.rows() + 1, Eigen::NoChange);
    cm.entries.row(cm.entries.rows() - 1).setOnes();
    cm.has_sum_row = true;
    cm.sum_row_index = static_cast<int>(cm.entries.rows()) - 1;
  }
  cm.row_rank = rational_row_rank(cm.entries);
}

}  // namespace

ConfigurationMatrix build_allele_count_matrix(const std::vector<Haplotype>& haplotypes,
                                              bool with_sum_row) {
  check_haplotypes(haplotypes);
  const int m = haplotypes.front().marker_count();
  const int h = static_cast<int>(haplotypes.size());
  ConfigurationMatrix cm;
  cm.entries.setZero(m, h);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < h; ++c) cm.entries(r, c) = haplotypes[c].allele(r);
  finalize(cm, with_sum_row);
  return cm;
}

ConfigurationMatrix build_subset_matrix(const std::vector<Haplotype>& haplotypes,
                                        const std::vector<std::vector<int>>& subsets,
                                        bool with_sum_row) {
  check_haplotypes(haplotypes);
  const int h = static_cast<int>(haplotypes.size());
  ConfigurationMatrix cm;
  cm.entries.setZero(static_cast<int>(subsets.size()), h);
  for (size_t r = 0; r < subsets.size(); ++r)
    for (int c : subsets[r]) {
      if (c < 0 || c >= h) throw InvalidInputError("subset index out of range");
      if (cm.entries(static_cast<int>(r), c))
        throw InvalidInputError("subset lists a haplotype twice");
      cm.entries(static_cast<int>(r), c) = 1;
    }
  finalize(cm, with_sum_row);
  return cm;
}

std::vector<int> matching_haplotypes(const std::vector<Haplotype>& haplotypes,
                                     const std::string& pattern) {
  check_haplotypes(haplotypes);
  if (static_cast<int>(pattern.size()) != haplotypes.front().marker_count())
    throw InvalidInputError("pattern length does not match marker count");
  for (char c : pattern)
    if (c != '0' && c != '1' && c != '?')
      throw InvalidInputError("pattern must consist of 0, 1 and ?");
  std::vector<int> out;
  for (size_t i = 0; i < haplotypes.size(); ++i) {
    bool ok = true;
    for (size_t m = 0; m < pattern.size(); ++m)
      if (pattern[m] != '?' && pattern[m] != haplotypes[i].bits[m]) { ok = false; break; }
    if (ok) out.push_back(static_cast<int>(i));
  }
  return out;
}

PreprocessResult preprocess_pool(const ConfigurationMatrix& raw, const IntVec& raw_counts,
                                 int size, ContradictionPolicy policy) {
  if (raw_counts.size() != raw.rows())
    throw InvalidInputError("count vector length does not match matrix rows");
  if (size < 0) throw InvalidInputError("pool size must be nonnegative");

  // Work on a copy that always carries the pool-size row.
  IntMat a = raw.entries;
  IntVec y = raw_counts;
  int sum_row = raw.sum_row_index;
  if (!raw.has_sum_row) {
    a.conservativeResize(a.rows() + 1, Eigen::NoChange);
    a.row(a.rows() - 1).setOnes();
    y.conservativeResize(y.size() + 1);
    sum_row = static_cast<int>(a.rows()) - 1;
    y(sum_row) = size;
  } else if (y(sum_row) != size) {
    throw DataInconsistencyError("pool-size row count disagrees with pool size");
  }

  for (int r = 0; r < y.size(); ++r) {
    if (y(r) < 0) throw InvalidInputError("observed count is negative");
    if (y(r) > size) throw DataInconsistencyError("observed count exceeds pool size");
  }

  // Keep the pool-size row first, then earlier rows before later ones.
  std::vector<int> priority;
  priority.push_back(sum_row);
  for (int r = 0; r < a.rows(); ++r)
    if (r != sum_row) priority.push_back(r);
  std::vector<int> kept = independent_rows(a, priority);

  IntMat basis(static_cast<int>(kept.size()), a.cols());
  for (size_t k = 0; k < kept.size(); ++k) basis.row(static_cast<int>(k)) = a.row(kept[k]);

  // Every dropped row must reproduce its observed count from the kept rows.
  std::vector<bool> is_kept(a.rows(), false);
  for (int k : kept) is_kept[k] = true;
  std::vector<int> contradicted;
  for (int r = 0; r < a.rows(); ++r) {
    if (is_kept[r]) continue;
    IntVec row = a.row(r);
    auto coef = express_row(basis, row);
    if (!coef)
      throw NumericalError("preprocess_pool: dropped row not in kept span");
    Rational implied(0);
    for (size_t k = 0; k < coef->size(); ++k)
      implied += (*coef)[k] * Rational(y(kept[k]));
    if (implied != Rational(y(r))) {
      if (policy == ContradictionPolicy::Drop) {
        contradicted.push_back(r);
        continue;
      }
      std::ostringstream msg;
      msg << "redundant count row " << r << " contradicts the retained rows";
      throw DataInconsistencyError(msg.str());
    }
  }

  auto reduced = std::make_shared<ConfigurationMatrix>();
  reduced->entries = basis;
  reduced->has_sum_row = true;
  // The sum row has top priority so it is always kept; find it in the
  // sorted kept list.
  for (size_t k = 0; k < kept.size(); ++k)
    if (kept[k] == sum_row) reduced->sum_row_index = static_cast<int>(k);
  reduced->row_rank = static_cast<int>(kept.size());

  PreprocessResult out;
  out.matrix = std::move(reduced);
  out.counts.resize(static_cast<int>(kept.size()));
  for (size_t k = 0; k < kept.size(); ++k) out.counts(static_cast<int>(k)) = y(kept[k]);
  out.kept_rows = std::move(kept);
  out.contradicted_rows = std::move(contradicted);
  return out;
}

std::vector<std::string> preprocess_dataset(Dataset& data, ContradictionPolicy policy) {
  // Pools sharing a raw matrix share the reduced one.
  std::map<const ConfigurationMatrix*, std::shared_ptr<const ConfigurationMatrix>> seen;
  std::vector<std::string> notes;
  for (auto& pool : data.pools) {
    if (!pool.matrix) throw InvalidInputError("pool has no configuration matrix");
    auto res = preprocess_pool(*pool.matrix, pool.counts, pool.size, policy);
    for (int r : res.contradicted_rows) {
      std::ostringstream msg;
      msg << "pool " << pool.pool_id << ": dropped count row " << r
          << "; no assignment of the candidate haplotypes reproduces it";
      notes.push_back(msg.str());
    }
    auto it = seen.find(pool.matrix.get());
    if (it != seen.end() && it->second->entries == res.matrix->entries) {
      pool.matrix = it->second;
    } else {
      seen[pool.matrix.get()] = res.matrix;
      pool.matrix = res.matrix;
    }
    pool.counts = res.counts;
  }
  return notes;
}

}  // namespace poolfreq
