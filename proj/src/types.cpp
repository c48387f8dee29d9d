#include "poolfreq/types.hpp"

#include <cmath>

#include "poolfreq/errors.hpp"

namespace poolfreq {

std::vector<Haplotype> all_haplotypes(int marker_count) {
  if (marker_count < 1 || marker_count > 24)
    throw InvalidInputError("all_haplotypes: marker count must be in [1, 24]");
  const int h = 1 << marker_count;
  std::vector<Haplotype> out;
  out.reserve(h);
  for (int v = 0; v < h; ++v) {
    std::string bits(marker_count, '0');
    for (int m = 0; m < marker_count; ++m)
      if ((v >> m) & 1) bits[m] = '1';
    out.emplace_back(std::move(bits));
  }
  return out;
}

Haplotype parse_haplotype(const std::string& bits) {
  if (bits.empty()) throw InvalidInputError("haplotype string is empty");
  for (char c : bits)
    if (c != '0' && c != '1')
      throw InvalidInputError("haplotype string must be 0/1, got '" + bits + "'");
  return Haplotype(bits);
}

bool latent_is_feasible(const PoolObservation& pool, const LatentCounts& z) {
  const auto& a = pool.matrix->entries;
  if (z.size() != a.cols()) return false;
  if ((z.array() < 0).any()) return false;
  if (!pool.matrix->has_sum_row && z.sum() != pool.size) return false;
  return (a * z - pool.counts).isZero(0);
}

FrequencyVector FrequencyVector::checked(Vec p, double tol) {
  if (p.size() == 0) throw InvalidInputError("frequency vector is empty");
  if ((p.array() < 0).any())
    throw InvalidInputError("frequency vector has a negative entry");
  if (std::abs(p.sum() - 1.0) > tol)
    throw InvalidInputError("frequency vector does not sum to one");
  return FrequencyVector{std::move(p)};
}

}  // namespace poolfreq
