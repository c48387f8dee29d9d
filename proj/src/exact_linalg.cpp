#include "poolfreq/exact_linalg.hpp"

#include <algorithm>

#include "poolfreq/errors.hpp"

namespace poolfreq {

namespace {

using RatRow = std::vector<Rational>;

// Incremental row-echelon basis over the rationals.
struct EchelonBasis {
  std::vector<RatRow> rows;    // each normalized to leading coefficient 1
  std::vector<int> pivot_cols;

  // Reduces r in place against the basis; returns the pivot column of the
  // residual, or -1 if r lies in the span.
  int reduce(RatRow& r) const {
    for (size_t k = 0; k < rows.size(); ++k) {
      const Rational& c = r[pivot_cols[k]];
      if (c != Rational(0)) {
        Rational f = c;
        for (size_t j = 0; j < r.size(); ++j) r[j] -= f * rows[k][j];
      }
    }
    for (size_t j = 0; j < r.size(); ++j)
      if (r[j] != Rational(0)) return static_cast<int>(j);
    return -1;
  }

  bool insert(RatRow r) {
    int piv = reduce(r);
    if (piv < 0) return false;
    Rational lead = r[piv];
    for (auto& v : r) v /= lead;
    rows.push_back(std::move(r));
    pivot_cols.push_back(piv);
    return true;
  }
};

RatRow rational_row(const IntMat& m, int i) {
  RatRow r(m.cols());
  for (int j = 0; j < m.cols(); ++j) r[j] = Rational(m(i, j));
  return r;
}

}  // namespace

int rational_row_rank(const IntMat& m) {
  EchelonBasis basis;
  for (int i = 0; i < m.rows(); ++i) basis.insert(rational_row(m, i));
  return static_cast<int>(basis.rows.size());
}

std::vector<int> independent_rows(const IntMat& m, const std::vector<int>& priority) {
  if (static_cast<int>(priority.size()) != m.rows())
    throw InvalidInputError("independent_rows: priority must permute the row indices");
  EchelonBasis basis;
  std::vector<int> kept;
  for (int i : priority)
    if (basis.insert(rational_row(m, i))) kept.push_back(i);
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<int> independent_columns(const IntMat& m) {
  IntMat t = m.transpose();
  EchelonBasis basis;
  std::vector<int> kept;
  for (int j = 0; j < t.rows(); ++j)
    if (basis.insert(rational_row(t, j))) kept.push_back(j);
  return kept;
}

std::optional<std::vector<Rational>> express_row(const IntMat& basis_rows, const IntVec& row) {
  const int k = static_cast<int>(basis_rows.rows());
  const int h = static_cast<int>(basis_rows.cols());
  if (row.size() != h) throw InvalidInputError("express_row: dimension mismatch");
  // Solve basis_rows^T c = row by Gaussian elimination on the
  // h x (k+1) augmented system.
  std::vector<RatRow> aug(h, RatRow(k + 1));
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < k; ++j) aug[i][j] = Rational(basis_rows(j, i));
    aug[i][k] = Rational(row(i));
  }
  std::vector<int> pivot_row_of_col(k, -1);
  int next_row = 0;
  for (int col = 0; col < k && next_row < h; ++col) {
    int sel = -1;
    for (int i = next_row; i < h; ++i)
      if (aug[i][col] != Rational(0)) { sel = i; break; }
    if (sel < 0) continue;
    std::swap(aug[sel], aug[next_row]);
    Rational lead = aug[next_row][col];
    for (auto& v : aug[next_row]) v /= lead;
    for (int i = 0; i < h; ++i) {
      if (i == next_row) continue;
      Rational f = aug[i][col];
      if (f == Rational(0)) continue;
      for (int j = col; j <= k; ++j) aug[i][j] -= f * aug[next_row][j];
    }
    pivot_row_of_col[col] = next_row;
    ++next_row;
  }
  // Inconsistent if any zero row has nonzero rhs.
  for (int i = 0; i < h; ++i) {
    bool all_zero = true;
    for (int j = 0; j < k; ++j)
      if (aug[i][j] != Rational(0)) { all_zero = false; break; }
    if (all_zero && aug[i][k] != Rational(0)) return std::nullopt;
  }
  std::vector<Rational> coef(k, Rational(0));
  for (int col = 0; col < k; ++col)
    if (pivot_row_of_col[col] >= 0) coef[col] = aug[pivot_row_of_col[col]][k];
  return coef;
}

long long integer_determinant(const IntMat& m) {
  if (m.rows() != m.cols()) throw InvalidInputError("integer_determinant: matrix not square");
  const int n = static_cast<int>(m.rows());
  if (n == 0) return 1;
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> a = m.cast<long long>();
  long long prev = 1;
  int sign = 1;
  for (int k = 0; k < n - 1; ++k) {
    if (a(k, k) == 0) {
      int sel = -1;
      for (int i = k + 1; i < n; ++i)
        if (a(i, k) != 0) { sel = i; break; }
      if (sel < 0) return 0;
      a.row(k).swap(a.row(sel));
      sign = -sign;
    }
    for (int i = k + 1; i < n; ++i)
      for (int j = k + 1; j < n; ++j)
        a(i, j) = (a(i, j) * a(k, k) - a(i, k) * a(k, j)) / prev;
    prev = a(k, k);
  }
  return sign * a(n - 1, n - 1);
}

ExactInverse exact_integer_inverse(const IntMat& m) {
  const long long det = integer_determinant(m);
  if (det == 0) throw NumericalError("exact_integer_inverse: singular matrix");
  const int n = static_cast<int>(m.rows());
  // Rational Gauss-Jordan on [m | I], then scale by det.
  std::vector<RatRow> aug(n, RatRow(2 * n, Rational(0)));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug[i][j] = Rational(m(i, j));
    aug[i][n + i] = Rational(1);
  }
  for (int col = 0; col < n; ++col) {
    int sel = -1;
    for (int i = col; i < n; ++i)
      if (aug[i][col] != Rational(0)) { sel = i; break; }
    std::swap(aug[sel], aug[col]);
    Rational lead = aug[col][col];
    for (auto& v : aug[col]) v /= lead;
    for (int i = 0; i < n; ++i) {
      if (i == col) continue;
      Rational f = aug[i][col];
      if (f == Rational(0)) continue;
      for (int j = 0; j < 2 * n; ++j) aug[i][j] -= f * aug[col][j];
    }
  }
  ExactInverse out;
  out.det = det;
  out.adjugate.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Rational v = aug[i][n + j] * Rational(det);
      if (v.denominator() != 1)
        throw NumericalError("exact_integer_inverse: adjugate entry not integral");
      out.adjugate(i, j) = v.numerator();
    }
  return out;
}

}  // namespace poolfreq
