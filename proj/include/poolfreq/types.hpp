#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace poolfreq {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IntVec = Eigen::VectorXi;
using IntMat = Eigen::MatrixXi;

// A haplotype over M biallelic markers, stored as a 0/1 string ("0110").
// Character m is the allele at marker m (0-based).
struct Haplotype {
  std::string bits;

  Haplotype() = default;
  explicit Haplotype(std::string b) : bits(std::move(b)) {}

  int marker_count() const { return static_cast<int>(bits.size()); }
  int allele(int marker) const { return bits[marker] - '0'; }
  bool operator==(const Haplotype&) const = default;
  bool operator<(const Haplotype& o) const { return bits < o.bits; }
};

// All 2^M haplotypes with marker 0 as the fastest-varying bit:
// M=2 gives 00, 10, 01, 11.
std::vector<Haplotype> all_haplotypes(int marker_count);

// Parses and validates a 0/1 string.
Haplotype parse_haplotype(const std::string& bits);

// 0-1 matrix mapping haplotype counts to observed counts. Row r of
// `entries` selects the haplotypes contributing to observed count r.
// A full-ones row encodes the known pool size.
struct ConfigurationMatrix {
  IntMat entries;          // rows x haplotypes, entries in {0,1}
  bool has_sum_row = false;
  int sum_row_index = -1;
  int row_rank = 0;        // exact rank over the rationals; 0 until computed

  int rows() const { return static_cast<int>(entries.rows()); }
  int haplotype_count() const { return static_cast<int>(entries.cols()); }
};

// One pooled observation: y = A z for an unobserved latent count vector z
// with sum(z) = size.
struct PoolObservation {
  std::string pool_id;
  int size = 0;                                   // number of organisms pooled
  IntVec counts;                                  // observed y, length = matrix->rows()
  std::shared_ptr<const ConfigurationMatrix> matrix;
  std::vector<double> covariates;                 // e.g. sampling time; may be empty
};

struct Dataset {
  int marker_count = 0;
  std::vector<Haplotype> haplotypes;              // column order of every matrix
  std::vector<PoolObservation> pools;
};

// Latent haplotype counts for one pool.
using LatentCounts = IntVec;

// Checks z >= 0, sum(z) = pool size and A z = y.
bool latent_is_feasible(const PoolObservation& pool, const LatentCounts& z);

// Frequency vector on the simplex; `checked` enforces the invariant.
struct FrequencyVector {
  Vec probs;
  static FrequencyVector checked(Vec p, double tol = 1e-9);
};

struct EnumerationBudget {
  std::uint64_t max_solutions = 10'000'000;
  double max_seconds = 60.0;
};

}  // namespace poolfreq
