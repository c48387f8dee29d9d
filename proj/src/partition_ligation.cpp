#include "poolfreq/partition_ligation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "poolfreq/errors.hpp"
#include "poolfreq/model_core.hpp"
#include "poolfreq/samplers.hpp"

namespace poolfreq {

std::vector<std::pair<int, int>> segment_markers(int marker_count, int block_size) {
  if (marker_count < 2) throw InvalidInputError("segment_markers: need at least two markers");
  if (block_size != 3 && block_size != 4)
    throw InvalidInputError("segment_markers: block size must be 3 or 4");
  std::vector<std::pair<int, int>> blocks;
  for (int begin = 0; begin < marker_count; begin += block_size)
    blocks.emplace_back(begin, std::min(begin + block_size, marker_count));
  if (blocks.size() > 1 && blocks.back().second - blocks.back().first < 2) {
    blocks[blocks.size() - 2].second = blocks.back().second;
    blocks.pop_back();
  }
  return blocks;
}

std::vector<Haplotype> concatenate_haplotypes(const std::vector<Haplotype>& left,
                                              const std::vector<Haplotype>& right) {
  std::vector<Haplotype> out;
  out.reserve(left.size() * right.size());
  for (const auto& a : left)
    for (const auto& b : right) out.push_back(Haplotype{a.bits + b.bits});
  return out;
}

namespace {

// Ligation reads counts row r as the allele count of marker r, so the
// pool matrices must be the plain allele-count design.
void require_marker_rows(const Dataset& data) {
  const auto reference = build_allele_count_matrix(data.haplotypes, false);
  for (const auto& pool : data.pools) {
    if (!pool.matrix) throw InvalidInputError("partition ligation: pool has no matrix");
    const auto& e = pool.matrix->entries;
    const bool sum_only_extra =
        e.rows() == data.marker_count + 1 &&
        (e.row(data.marker_count).array() == 1).all() && pool.matrix->has_sum_row;
    if (!((e.rows() == data.marker_count || sum_only_extra) &&
          e.topRows(data.marker_count) == reference.entries))
      throw InvalidInputError(
          "partition ligation: pools must carry per-marker allele counts for every marker");
  }
}

struct Segment {
  int begin = 0;
  int end = 0;
  std::vector<Haplotype> candidates;
  Vec estimates;
};

}  // namespace

Dataset restrict_to_markers(const Dataset& data, int begin, int end,
                            std::vector<Haplotype> candidates) {
  if (begin < 0 || end > data.marker_count || end - begin < 1)
    throw InvalidInputError("restrict_to_markers: bad marker range");
  for (const auto& hap : candidates)
    if (static_cast<int>(hap.bits.size()) != end - begin)
      throw InvalidInputError("restrict_to_markers: candidate length must match the range");
  require_marker_rows(data);

  Dataset out;
  out.marker_count = end - begin;
  out.haplotypes = std::move(candidates);
  ConfigurationMatrix plain = build_allele_count_matrix(out.haplotypes, false);

  // Pruning can leave marker rows linearly dependent under the surviving
  // candidates, and with the true haplotypes gone the dependent counts need
  // not stay consistent. Probe the reduction with counts a real assignment
  // generates and, only when rows fall out, carry the independent subset so
  // preprocessing cannot reject the block.
  IntVec probe = plain.entries.col(0);
  auto reduced = preprocess_pool(plain, probe, 1);
  const bool deficient = static_cast<int>(reduced.kept_rows.size()) < plain.rows() + 1;

  std::shared_ptr<const ConfigurationMatrix> matrix =
      deficient ? reduced.matrix
                : std::make_shared<const ConfigurationMatrix>(std::move(plain));
  for (const auto& pool : data.pools) {
    PoolObservation restricted;
    restricted.pool_id = pool.pool_id;
    restricted.size = pool.size;
    restricted.matrix = matrix;
    if (deficient) {
      IntVec counts(static_cast<int>(reduced.kept_rows.size()));
      for (size_t k = 0; k < reduced.kept_rows.size(); ++k) {
        const int r = reduced.kept_rows[k];
        counts(static_cast<int>(k)) =
            r == plain.entries.rows() ? pool.size : pool.counts(begin + r);
      }
      restricted.counts = std::move(counts);
    } else {
      restricted.counts = pool.counts.segment(begin, end - begin);
    }
    restricted.covariates = pool.covariates;
    out.pools.push_back(std::move(restricted));
  }
  return out;
}

LigationResult run_partition_ligation(const Dataset& data, const LigationConfig& config) {
  if (!(config.threshold > 0.0) || !(config.threshold < 1.0))
    throw InvalidInputError("partition ligation: threshold must be inside (0, 1)");
  if (config.max_candidates < 1)
    throw InvalidInputError("partition ligation: candidate cap must be positive");
  require_marker_rows(data);

  std::vector<Segment> segments;
  for (auto [begin, end] : segment_markers(data.marker_count, config.block_size)) {
    Segment s;
    s.begin = begin;
    s.end = end;
    s.candidates = all_haplotypes(end - begin);
    segments.push_back(std::move(s));
  }

  LigationResult result;
  while (true) {
    LigationLevel level;
    for (auto& seg : segments) {
      if (seg.candidates.size() == 1) {
        seg.estimates = Vec::Ones(1);
      } else {
        auto restricted = restrict_to_markers(data, seg.begin, seg.end, seg.candidates);
        seg.estimates = run_inference(restricted, config.prior, config.sampler).mean();
      }

      std::vector<size_t> keep;
      for (size_t k = 0; k < seg.candidates.size(); ++k)
        if (seg.estimates(static_cast<int>(k)) > config.threshold) keep.push_back(k);
      if (keep.empty()) {
        std::ostringstream msg;
        msg << "partition ligation: no partial haplotype over markers [" << seg.begin << ", "
            << seg.end << ") cleared the threshold " << config.threshold
            << "; lower the threshold";
        throw InvalidInputError(msg.str());
      }
      if (static_cast<int>(keep.size()) > config.max_candidates) {
        std::stable_sort(keep.begin(), keep.end(), [&](size_t a, size_t b) {
          return seg.estimates(static_cast<int>(a)) > seg.estimates(static_cast<int>(b));
        });
        keep.resize(static_cast<size_t>(config.max_candidates));
        std::sort(keep.begin(), keep.end());
        level.cap_applied = true;
        std::ostringstream msg;
        msg << "partition ligation: capped markers [" << seg.begin << ", " << seg.end << ") at "
            << config.max_candidates << " candidates";
        result.messages.push_back(msg.str());
      }

      std::vector<Haplotype> kept_haps;
      Vec kept_est(keep.size());
      for (size_t j = 0; j < keep.size(); ++j) {
        kept_haps.push_back(seg.candidates[keep[j]]);
        kept_est(static_cast<int>(j)) = seg.estimates(static_cast<int>(keep[j]));
      }
      seg.candidates = std::move(kept_haps);
      seg.estimates = std::move(kept_est);
      level.kept_sizes.push_back(static_cast<int>(seg.candidates.size()));
    }
    result.levels.push_back(std::move(level));

    if (segments.size() == 1) {
      result.haplotypes = std::move(segments[0].candidates);
      result.estimates = std::move(segments[0].estimates);
      return result;
    }

    std::vector<Segment> merged;
    for (size_t j = 0; j + 1 < segments.size(); j += 2) {
      Segment s;
      s.begin = segments[j].begin;
      s.end = segments[j + 1].end;
      s.candidates = concatenate_haplotypes(segments[j].candidates, segments[j + 1].candidates);
      merged.push_back(std::move(s));
    }
    if (segments.size() % 2 == 1) merged.push_back(std::move(segments.back()));
    segments = std::move(merged);
  }
}

}  // namespace poolfreq
