#include "poolfreq/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "poolfreq/errors.hpp"

namespace poolfreq {

double tvd(const Vec& a, const Vec& b) {
  if (a.size() != b.size()) throw InvalidInputError("tvd: vectors must share a support");
  return 0.5 * (a - b).cwiseAbs().sum();
}

double tvd(const std::vector<std::string>& labels_a, const Vec& a,
           const std::vector<std::string>& labels_b, const Vec& b) {
  if (static_cast<int>(labels_a.size()) != a.size() ||
      static_cast<int>(labels_b.size()) != b.size())
    throw InvalidInputError("tvd: one label per entry required");
  std::map<std::string, double> diff;
  for (size_t i = 0; i < labels_a.size(); ++i) diff[labels_a[i]] += a(static_cast<int>(i));
  for (size_t i = 0; i < labels_b.size(); ++i) diff[labels_b[i]] -= b(static_cast<int>(i));
  double acc = 0.0;
  for (const auto& [label, d] : diff) acc += std::abs(d);
  return 0.5 * acc;
}

namespace {

// Split every chain in half, dropping the middle draw of odd-length chains.
std::vector<Vec> split_chains(const std::vector<Vec>& chains) {
  std::vector<Vec> out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const int half = static_cast<int>(c.size()) / 2;
    out.push_back(c.head(half));
    out.push_back(c.tail(half));
  }
  return out;
}

// Average-rank transform of the pooled draws followed by a normal quantile
// map; ties share their mean rank.
std::vector<Vec> rank_normalize(const std::vector<Vec>& chains) {
  struct Entry {
    double value;
    int chain;
    int index;
  };
  std::vector<Entry> pool;
  for (size_t m = 0; m < chains.size(); ++m)
    for (int j = 0; j < chains[m].size(); ++j)
      pool.push_back({chains[m](j), static_cast<int>(m), j});
  std::sort(pool.begin(), pool.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });

  const double s = static_cast<double>(pool.size());
  std::vector<Vec> out(chains.size());
  for (size_t m = 0; m < chains.size(); ++m) out[m] = Vec(chains[m].size());
  const boost::math::normal_distribution<double> gauss;
  size_t i = 0;
  while (i < pool.size()) {
    size_t j = i;
    while (j < pool.size() && pool[j].value == pool[i].value) ++j;
    const double mean_rank = (static_cast<double>(i + j - 1) / 2.0) + 1.0;
    const double z = boost::math::quantile(gauss, (mean_rank - 0.375) / (s + 0.25));
    for (size_t k = i; k < j; ++k) out[static_cast<size_t>(pool[k].chain)](pool[k].index) = z;
    i = j;
  }
  return out;
}

struct VarianceParts {
  double w = 0.0;        // mean within-chain variance
  double var_plus = 0.0; // marginal posterior variance estimate
  int m = 0;
  int n = 0;
};

VarianceParts variance_parts(const std::vector<Vec>& chains) {
  VarianceParts p;
  p.m = static_cast<int>(chains.size());
  p.n = static_cast<int>(chains[0].size());
  Vec means(p.m);
  Vec vars(p.m);
  for (int m = 0; m < p.m; ++m) {
    means(m) = chains[static_cast<size_t>(m)].mean();
    const Vec d = chains[static_cast<size_t>(m)].array() - means(m);
    vars(m) = p.n > 1 ? d.squaredNorm() / (p.n - 1) : 0.0;
  }
  p.w = vars.mean();
  double b = 0.0;  // n * variance of chain means
  if (p.m > 1) {
    const double grand = means.mean();
    b = p.n * (means.array() - grand).square().sum() / (p.m - 1);
  }
  p.var_plus = (p.n - 1) * p.w / p.n + b / p.n;
  return p;
}

// Biased (1/n) autocovariance of one chain at the given lag.
double autocov(const Vec& c, int lag) {
  const int n = static_cast<int>(c.size());
  const double mean = c.mean();
  double acc = 0.0;
  for (int j = 0; j + lag < n; ++j) acc += (c(j) - mean) * (c(j + lag) - mean);
  return acc / n;
}

void check_chain_shapes(const std::vector<Vec>& chains) {
  if (chains.empty()) throw InvalidInputError("diagnostics: at least one chain required");
  for (const auto& c : chains)
    if (c.size() != chains[0].size())
      throw InvalidInputError("diagnostics: chains must have equal lengths");
}

// Combined multi-chain autocorrelation ESS with Geyer initial-monotone
// truncation, on already rank-normalized split chains.
double ess_core(const std::vector<Vec>& chains) {
  const auto p = variance_parts(chains);
  const double total = static_cast<double>(p.m) * p.n;
  if (!(p.var_plus > 0)) return total;  // zero-variance convention

  std::vector<double> rho;
  rho.push_back(1.0);
  for (int t = 1; t < p.n; ++t) {
    double mean_gamma = 0.0;
    for (const auto& c : chains) mean_gamma += autocov(c, t);
    mean_gamma /= p.m;
    rho.push_back(1.0 - (p.w - mean_gamma) / p.var_plus);
  }

  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (size_t k = 0; 2 * k + 1 < rho.size(); ++k) {
    double pair = rho[2 * k] + rho[2 * k + 1];
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);  // initial monotone sequence
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(total + 10.0));
  return total / tau;
}

double rhat_core(const std::vector<Vec>& chains) {
  const auto p = variance_parts(chains);
  if (!(p.var_plus > 0)) return 1.0;  // all draws identical
  if (!(p.w > 0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(p.var_plus / p.w);
}

std::vector<Vec> column_slices(const std::vector<Mat>& chains, int col) {
  std::vector<Vec> out;
  out.reserve(chains.size());
  for (const auto& m : chains) out.push_back(m.col(col));
  return out;
}

}  // namespace

double ess(const std::vector<Vec>& chains) {
  check_chain_shapes(chains);
  if (chains[0].size() < 4) return static_cast<double>(chains.size() * chains[0].size());
  return ess_core(rank_normalize(split_chains(chains)));
}

double rhat(const std::vector<Vec>& chains) {
  check_chain_shapes(chains);
  if (chains.size() == 1 && chains[0].size() < 4)
    return std::numeric_limits<double>::quiet_NaN();
  auto split = split_chains(chains);
  const double bulk = rhat_core(rank_normalize(split));

  // Folded variant targets scale mismatches the bulk statistic can miss.
  std::vector<double> pool;
  for (const auto& c : split) pool.insert(pool.end(), c.data(), c.data() + c.size());
  std::nth_element(pool.begin(), pool.begin() + pool.size() / 2, pool.end());
  const double median = pool[pool.size() / 2];
  std::vector<Vec> folded = split;
  for (auto& c : folded) c = (c.array() - median).abs();
  return std::max(bulk, rhat_core(rank_normalize(folded)));
}

Vec ess_by_column(const std::vector<Mat>& chains) {
  if (chains.empty()) throw InvalidInputError("diagnostics: at least one chain required");
  Vec out(chains[0].cols());
  for (int c = 0; c < chains[0].cols(); ++c) out(c) = ess(column_slices(chains, c));
  return out;
}

Vec rhat_by_column(const std::vector<Mat>& chains) {
  if (chains.empty()) throw InvalidInputError("diagnostics: at least one chain required");
  Vec out(chains[0].cols());
  for (int c = 0; c < chains[0].cols(); ++c) out(c) = rhat(column_slices(chains, c));
  return out;
}

namespace {

std::vector<int> thin_indices(int n, int target) {
  std::vector<int> idx;
  if (target <= 0 || n <= target) {
    idx.resize(static_cast<size_t>(std::max(n, 0)));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  idx.reserve(static_cast<size_t>(target));
  for (int j = 1; j <= target; ++j)
    idx.push_back(static_cast<int>(static_cast<long long>(j) * n / target) - 1);
  return idx;
}

}  // namespace

std::vector<Vec> thin_chain_draws(const std::vector<Vec>& chains, int target) {
  std::vector<Vec> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    auto idx = thin_indices(static_cast<int>(c.size()), target);
    Vec t(idx.size());
    for (size_t j = 0; j < idx.size(); ++j) t(static_cast<int>(j)) = c(idx[j]);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Mat> thin_chain_draws(const std::vector<Mat>& chains, int target) {
  std::vector<Mat> out;
  out.reserve(chains.size());
  for (const auto& c : chains) {
    auto idx = thin_indices(static_cast<int>(c.rows()), target);
    Mat t(idx.size(), c.cols());
    for (size_t j = 0; j < idx.size(); ++j) t.row(static_cast<int>(j)) = c.row(idx[j]);
    out.push_back(std::move(t));
  }
  return out;
}

Interval equal_tail_interval(std::vector<double> sample, double level) {
  if (sample.empty()) throw InvalidInputError("equal_tail_interval: empty sample");
  if (!(level > 0.0) || !(level < 1.0))
    throw InvalidInputError("equal_tail_interval: level must be inside (0, 1)");
  std::sort(sample.begin(), sample.end());
  auto quantile = [&](double q) {
    const double h = q * (static_cast<double>(sample.size()) - 1.0);
    const size_t lo = static_cast<size_t>(h);
    const size_t hi = std::min(lo + 1, sample.size() - 1);
    return sample[lo] + (h - static_cast<double>(lo)) * (sample[hi] - sample[lo]);
  };
  return {quantile((1.0 - level) / 2.0), quantile((1.0 + level) / 2.0)};
}

CoverageAccumulator::CoverageAccumulator(std::vector<double> levels) {
  table_.levels = std::move(levels);
  table_.covered.assign(table_.levels.size(), 0);
}

void CoverageAccumulator::add(const PosteriorDraws& draws, const Vec& truth) {
  if (draws.freq.empty()) throw InvalidInputError("coverage: draws are empty");
  const int h = static_cast<int>(draws.freq[0].cols());
  if (truth.size() != h)
    throw InvalidInputError("coverage: truth length must match the draw columns");
  long long rows = 0;
  for (const auto& m : draws.freq) rows += m.rows();
  for (int c = 0; c < h; ++c) {
    if (truth(c) == 0.0) continue;  // absent haplotypes are not scored
    std::vector<double> pooled;
    pooled.reserve(static_cast<size_t>(rows));
    for (const auto& m : draws.freq)
      for (int s = 0; s < m.rows(); ++s) pooled.push_back(m(s, c));
    for (size_t i = 0; i < table_.levels.size(); ++i)
      if (equal_tail_interval(pooled, table_.levels[i]).contains(truth(c)))
        table_.covered[i] += 1;
    table_.total += 1;
  }
}

CoverageTable credible_coverage(const PosteriorDraws& draws, const Vec& truth,
                                const std::vector<double>& levels) {
  CoverageAccumulator acc(levels);
  acc.add(draws, truth);
  return acc.table();
}

double power_law_exponent(const Vec& x, const Vec& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw InvalidInputError("power_law_exponent: need two points per series");
  Vec lx = x.array().log();
  Vec ly = y.array().log();
  const double mx = lx.mean();
  const double my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (!(sxx > 0)) throw InvalidInputError("power_law_exponent: x values must differ");
  return (lx.array() - mx).cwiseProduct(ly.array() - my).sum() / sxx;
}

}  // namespace poolfreq
