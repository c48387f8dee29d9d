#include "poolfreq/feasible.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>

#include "poolfreq/errors.hpp"
#include "poolfreq/exact_linalg.hpp"
#include "poolfreq/numerics.hpp"

namespace poolfreq {

VariableBounds preliminary_bounds(const ConfigurationMatrix& m, const IntVec& y, int size) {
  if (y.size() != m.rows()) throw InvalidInputError("preliminary_bounds: count length mismatch");
  const int h = m.haplotype_count();
  VariableBounds b;
  b.lower = IntVec::Zero(h);
  b.upper.resize(h);
  for (int c = 0; c < h; ++c) {
    int u = size;
    for (int r = 0; r < m.rows(); ++r)
      u = std::min(u, m.entries(r, c) ? y(r) : size - y(r));
    b.upper(c) = u;
  }
  return b;
}

namespace {

std::shared_ptr<const ConfigurationMatrix> with_sum_row(
    std::shared_ptr<const ConfigurationMatrix> m, IntVec& y, int size) {
  if (m->has_sum_row) {
    if (y(m->sum_row_index) != size)
      throw DataInconsistencyError("pool-size row count disagrees with pool size");
    return m;
  }
  auto aug = std::make_shared<ConfigurationMatrix>();
  aug->entries.resize(m->rows() + 1, m->haplotype_count());
  aug->entries.topRows(m->rows()) = m->entries;
  aug->entries.row(m->rows()).setOnes();
  aug->has_sum_row = true;
  aug->sum_row_index = m->rows();
  aug->row_rank = rational_row_rank(aug->entries);
  y.conservativeResize(y.size() + 1);
  y(y.size() - 1) = size;
  return aug;
}

}  // namespace

FeasibleSolver::FeasibleSolver(std::shared_ptr<const ConfigurationMatrix> matrix, IntVec counts,
                               int size)
    : counts_(std::move(counts)), size_(size) {
  if (!matrix) throw InvalidInputError("FeasibleSolver: null matrix");
  if (counts_.size() != matrix->rows())
    throw InvalidInputError("FeasibleSolver: count length mismatch");
  matrix_ = with_sum_row(std::move(matrix), counts_, size);
  const int r = matrix_->rows();
  if (rational_row_rank(matrix_->entries) != r)
    throw InvalidInputError("FeasibleSolver: matrix rows must be independent (preprocess first)");

  box_ = preliminary_bounds(*matrix_, counts_, size_);

  tail_cols_ = independent_columns(matrix_->entries);
  if (static_cast<int>(tail_cols_.size()) != r)
    throw NumericalError("FeasibleSolver: no independent column set of full rank");
  std::vector<bool> is_tail(matrix_->haplotype_count(), false);
  for (int c : tail_cols_) is_tail[c] = true;
  for (int c = 0; c < matrix_->haplotype_count(); ++c)
    if (!is_tail[c]) free_cols_.push_back(c);

  IntMat tail(r, r);
  for (int k = 0; k < r; ++k) tail.col(k) = matrix_->entries.col(tail_cols_[k]);
  auto inv = exact_integer_inverse(tail);
  tail_adjugate_ = std::move(inv.adjugate);
  tail_det_ = inv.det;
}

struct FeasibleSolver::SearchState {
  std::function<bool(const LatentCounts&)> emit;  // false = stop early
  std::uint64_t max_solutions = 0;
  std::chrono::steady_clock::time_point deadline;
  std::uint64_t solutions = 0;
  std::uint64_t nodes = 0;
  bool overflowed = false;
};

bool FeasibleSolver::search(const VariableBounds& bounds, SearchState& st) const {
  const int h = matrix_->haplotype_count();
  const int r = matrix_->rows();
  const int f = static_cast<int>(free_cols_.size());
  if (bounds.lower.size() != h || bounds.upper.size() != h)
    throw InvalidInputError("FeasibleSolver: bounds length mismatch");
  for (int c = 0; c < h; ++c)
    if (bounds.lower(c) > bounds.upper(c)) return true;  // empty box, nothing to emit

  // Permuted view: free columns first, then the tail block.
  std::vector<int> perm(free_cols_);
  perm.insert(perm.end(), tail_cols_.begin(), tail_cols_.end());
  IntVec lp(h), up(h);
  IntMat ap(r, h);
  for (int j = 0; j < h; ++j) {
    lp(j) = bounds.lower(perm[j]);
    up(j) = bounds.upper(perm[j]);
    ap.col(j) = matrix_->entries.col(perm[j]);
  }

  Eigen::Matrix<long long, Eigen::Dynamic, 1> v = counts_.cast<long long>();
  IntVec zfree = IntVec::Zero(std::max(f, 1));
  LatentCounts z(h);

  auto solve_tail = [&]() -> bool {
    // Exact integer solve of the tail block against the residual counts.
    Eigen::Matrix<long long, Eigen::Dynamic, 1> w = tail_adjugate_ * v;
    for (int k = 0; k < r; ++k) {
      long long q = w(k);
      if (q % tail_det_ != 0) return true;
      long long t = q / tail_det_;
      if (t < lp(f + k) || t > up(f + k)) return true;
    }
    if (st.solutions >= st.max_solutions) {
      st.overflowed = true;
      return false;
    }
    for (int j = 0; j < f; ++j) z(perm[j]) = zfree(j);
    for (int k = 0; k < r; ++k) z(perm[f + k]) = static_cast<int>(w(k) / tail_det_);
    ++st.solutions;
    return st.emit(z);
  };

  if (f == 0) return solve_tail();

  // Running surplus/deficit per row: U*/L* bound the value of the current
  // free column given already fixed columns and box reserves for later ones.
  std::vector<IntVec> u1(f), u0(f), l1(f), l0(f);
  for (int j = 0; j < f; ++j) {
    u1[j].resize(r); u0[j].resize(r); l1[j].resize(r); l0[j].resize(r);
  }
  for (int i = 0; i < r; ++i) {
    long long sal = 0, scl = 0, sau = 0, scu = 0;
    for (int j = 1; j < h; ++j) {
      if (ap(i, j)) { sal += lp(j); sau += up(j); }
      else { scl += lp(j); scu += up(j); }
    }
    const long long y1 = counts_(i);
    const long long y0 = static_cast<long long>(size_) - counts_(i);
    u1[0](i) = static_cast<int>(y1 - sal);
    u0[0](i) = static_cast<int>(y0 - scl);
    l1[0](i) = static_cast<int>(y1 - sau);
    l0[0](i) = static_cast<int>(y0 - scu);
  }

  std::function<bool(int)> descend = [&](int j) -> bool {
    int zmin = lp(j), zmax = up(j);
    for (int i = 0; i < r; ++i) {
      if (ap(i, j)) {
        zmin = std::max(zmin, l1[j](i));
        zmax = std::min(zmax, u1[j](i));
      } else {
        zmin = std::max(zmin, l0[j](i));
        zmax = std::min(zmax, u0[j](i));
      }
    }
    for (int zv = zmin; zv <= zmax; ++zv) {
      if ((++st.nodes & 1023u) == 0 &&
          std::chrono::steady_clock::now() > st.deadline) {
        st.overflowed = true;
        return false;
      }
      zfree(j) = zv;
      bool keep_going;
      if (j + 1 == f) {
        for (int i = 0; i < r; ++i)
          if (ap(i, j)) v(i) -= zv;
        keep_going = solve_tail();
        for (int i = 0; i < r; ++i)
          if (ap(i, j)) v(i) += zv;
      } else {
        for (int i = 0; i < r; ++i) {
          const int aj = ap(i, j), an = ap(i, j + 1);
          u1[j + 1](i) = u1[j](i) - aj * zv + an * lp(j + 1);
          u0[j + 1](i) = u0[j](i) - (1 - aj) * zv + (1 - an) * lp(j + 1);
          l1[j + 1](i) = l1[j](i) - aj * zv + an * up(j + 1);
          l0[j + 1](i) = l0[j](i) - (1 - aj) * zv + (1 - an) * up(j + 1);
          if (ap(i, j)) v(i) -= zv;
        }
        keep_going = descend(j + 1);
        for (int i = 0; i < r; ++i)
          if (ap(i, j)) v(i) += zv;
      }
      if (!keep_going) return false;
    }
    return true;
  };

  return descend(0);
}

std::vector<LatentCounts> FeasibleSolver::enumerate(const EnumerationBudget& budget) const {
  return enumerate(box_, budget);
}

std::vector<LatentCounts> FeasibleSolver::enumerate(const VariableBounds& bounds,
                                                    const EnumerationBudget& budget) const {
  std::vector<LatentCounts> out;
  SearchState st;
  st.max_solutions = budget.max_solutions;
  st.deadline = std::chrono::steady_clock::now() +
                std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                    std::chrono::duration<double>(budget.max_seconds));
  st.emit = [&out](const LatentCounts& z) {
    out.push_back(z);
    return true;
  };
  search(bounds, st);
  if (st.overflowed) {
    std::ostringstream msg;
    msg << "feasible-set enumeration exceeded its budget ("
        << st.solutions << " solutions found; limits: " << budget.max_solutions
        << " solutions, " << budget.max_seconds << " s)";
    throw EnumerationOverflowError(msg.str(), st.solutions);
  }
  return out;
}

std::optional<LatentCounts> FeasibleSolver::find_first() const { return find_first(box_); }

std::optional<LatentCounts> FeasibleSolver::find_first(const VariableBounds& bounds) const {
  std::optional<LatentCounts> out;
  SearchState st;
  st.max_solutions = 1;
  st.deadline = std::chrono::steady_clock::now() + std::chrono::seconds(600);
  st.emit = [&out](const LatentCounts& z) {
    out = z;
    return false;
  };
  search(bounds, st);
  if (!out && st.overflowed)
    throw EnumerationOverflowError("feasibility probe timed out", 0);
  return out;
}

std::optional<VariableBounds> FeasibleSolver::tighten_bounds() const {
  auto witness = find_first();
  if (!witness) return std::nullopt;
  VariableBounds tight = box_;
  const int h = matrix_->haplotype_count();
  for (int c = 0; c < h; ++c) {
    // Smallest attainable z_c: bisect on "feasible with z_c <= t".
    int lo = tight.lower(c), hi = (*witness)(c);
    while (lo < hi) {
      const int mid = lo + (hi - lo) / 2;
      VariableBounds probe = tight;
      probe.upper(c) = mid;
      if (find_first(probe)) hi = mid;
      else lo = mid + 1;
    }
    tight.lower(c) = lo;
    // Largest attainable z_c: bisect on "feasible with z_c >= t".
    lo = (*witness)(c); hi = tight.upper(c);
    while (lo < hi) {
      const int mid = lo + (hi - lo + 1) / 2;
      VariableBounds probe = tight;
      probe.lower(c) = mid;
      if (find_first(probe)) lo = mid;
      else hi = mid - 1;
    }
    tight.upper(c) = lo;
  }
  return tight;
}

std::vector<LatentCounts> enumerate_feasible(const PoolObservation& pool,
                                             const EnumerationBudget& budget) {
  FeasibleSolver solver(pool.matrix, pool.counts, pool.size);
  return solver.enumerate(budget);
}

std::optional<LatentCounts> find_initial_latents(const PoolObservation& pool) {
  FeasibleSolver solver(pool.matrix, pool.counts, pool.size);
  return solver.find_first();
}

std::optional<VariableBounds> tighten_bounds(const PoolObservation& pool) {
  FeasibleSolver solver(pool.matrix, pool.counts, pool.size);
  return solver.tighten_bounds();
}

bool fiber_is_singleton(const VariableBounds& tightened) {
  return tightened.lower == tightened.upper;
}

FeasibleSetLikelihood::FeasibleSetLikelihood(const std::vector<LatentCounts>& solutions,
                                             int size) {
  if (solutions.empty())
    throw DataInconsistencyError("FeasibleSetLikelihood: empty feasible set");
  const int k = static_cast<int>(solutions.size());
  const int h = static_cast<int>(solutions.front().size());
  z_.resize(k, h);
  logcoef_.resize(k);
  for (int i = 0; i < k; ++i) {
    if (solutions[i].size() != h || solutions[i].sum() != size)
      throw InvalidInputError("FeasibleSetLikelihood: inconsistent solution list");
    z_.row(i) = solutions[i].cast<double>();
    logcoef_(i) = log_multinomial_coef(size, solutions[i]);
  }
}

double FeasibleSetLikelihood::log_likelihood(const Vec& p) const {
  if (p.size() != z_.cols()) throw InvalidInputError("log_likelihood: dimension mismatch");
  if ((p.array() < 0).any()) throw InvalidInputError("log_likelihood: negative probability");
  if ((p.array() > 0).all()) return log_likelihood_logp(p.array().log());
  // Boundary-exact path: a solution using a zero-probability haplotype
  // contributes nothing.
  Vec logp = p.array().log();  // -inf where p_h = 0
  Vec w(z_.rows());
  for (int i = 0; i < z_.rows(); ++i) {
    double acc = logcoef_(i);
    for (int c = 0; c < z_.cols(); ++c) {
      if (z_(i, c) == 0.0) continue;
      if (p(c) == 0.0) { acc = neg_inf; break; }
      acc += z_(i, c) * logp(c);
    }
    w(i) = acc;
  }
  return log_sum_exp(w);
}

double FeasibleSetLikelihood::log_likelihood_logp(const Vec& logp) const {
  Vec w = logcoef_ + z_ * logp;
  return log_sum_exp(w);
}

std::pair<double, Vec> FeasibleSetLikelihood::log_likelihood_and_expected(const Vec& logp) const {
  Vec w = logcoef_ + z_ * logp;
  const double m = w.maxCoeff();
  Vec e = (w.array() - m).exp();
  const double s = e.sum();
  Vec expected = (z_.transpose() * e) / s;
  return {m + std::log(s), std::move(expected)};
}

double exact_log_likelihood(const PoolObservation& pool, const Vec& p,
                            const EnumerationBudget& budget) {
  FeasibleSetLikelihood like(enumerate_feasible(pool, budget), pool.size);
  return like.log_likelihood(p);
}

Vec exact_log_likelihood_gradient(const PoolObservation& pool, const Vec& p,
                                  const EnumerationBudget& budget) {
  if ((p.array() <= 0).any())
    throw InvalidInputError("exact_log_likelihood_gradient: p must be strictly interior");
  FeasibleSetLikelihood like(enumerate_feasible(pool, budget), pool.size);
  auto [value, expected] = like.log_likelihood_and_expected(p.array().log());
  (void)value;
  return expected.array() / p.array();
}

void write_feasible_cache(const std::string& path, const std::vector<LatentCounts>& solutions) {
  std::ofstream out(path);
  if (!out) throw InvalidInputError("cannot open feasible cache for writing: " + path);
  const int h = solutions.empty() ? 0 : static_cast<int>(solutions.front().size());
  out << "# feasible-set cache haplotypes=" << h << " solutions=" << solutions.size() << "\n";
  for (const auto& z : solutions) {
    for (int c = 0; c < z.size(); ++c) out << (c ? "\t" : "") << z(c);
    out << "\n";
  }
}

std::vector<LatentCounts> read_feasible_cache(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInputError("cannot open feasible cache: " + path);
  std::vector<LatentCounts> out;
  std::string line;
  int h = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<int> vals;
    int v;
    while (ss >> v) vals.push_back(v);
    if (h < 0) h = static_cast<int>(vals.size());
    if (static_cast<int>(vals.size()) != h)
      throw InvalidInputError("feasible cache has ragged rows: " + path);
    LatentCounts z(h);
    for (int c = 0; c < h; ++c) z(c) = vals[c];
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace poolfreq
