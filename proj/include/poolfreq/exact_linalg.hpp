#pragma once

#include <optional>
#include <vector>

#include <boost/rational.hpp>

#include "poolfreq/types.hpp"

namespace poolfreq {

using Rational = boost::rational<long long>;

// Exact row rank over the rationals.
int rational_row_rank(const IntMat& m);

// Greedy maximal independent row subset, scanning rows in `priority` order.
// Returns the kept row indices sorted ascending.
std::vector<int> independent_rows(const IntMat& m, const std::vector<int>& priority);

// Greedy independent column subset of full column rank rank(m), scanning
// left to right. Returns the kept column indices ascending.
std::vector<int> independent_columns(const IntMat& m);

// Coefficients expressing `row` as a rational combination of the rows of
// `basis_rows`; nullopt if `row` is not in their span.
std::optional<std::vector<Rational>> express_row(const IntMat& basis_rows, const IntVec& row);

// Exact determinant of a square integer matrix (fraction-free Bareiss).
long long integer_determinant(const IntMat& m);

// Exact inverse of a nonsingular square integer matrix as adjugate / det,
// so inverse * v = (adjugate * v) / det with integer adjugate.
struct ExactInverse {
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> adjugate;
  long long det = 0;
};
ExactInverse exact_integer_inverse(const IntMat& m);

}  // namespace poolfreq
