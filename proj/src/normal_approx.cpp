#include "poolfreq/normal_approx.hpp"

#include <cmath>
#include <numbers>

#include "poolfreq/errors.hpp"

namespace poolfreq {

namespace {

struct Workspace {
  Mat a;      // informative rows as doubles
  Vec y;      // matching counts
  int size = 0;
};

Workspace informative_rows(const PoolObservation& pool, std::vector<int>* rows_out = nullptr) {
  const auto& m = *pool.matrix;
  if (pool.counts.size() != m.rows())
    throw InvalidInputError("approx likelihood: count length mismatch");
  Workspace w;
  w.size = pool.size;
  std::vector<int> rows;
  for (int r = 0; r < m.rows(); ++r)
    if (!(m.has_sum_row && r == m.sum_row_index)) rows.push_back(r);
  w.a.resize(static_cast<int>(rows.size()), m.haplotype_count());
  w.y.resize(static_cast<int>(rows.size()));
  for (size_t k = 0; k < rows.size(); ++k) {
    w.a.row(static_cast<int>(k)) = m.entries.row(rows[k]).cast<double>();
    w.y(static_cast<int>(k)) = pool.counts(rows[k]);
  }
  if (rows_out) *rows_out = std::move(rows);
  return w;
}

void check_p(const Vec& p, int h) {
  if (p.size() != h) throw InvalidInputError("approx likelihood: p dimension mismatch");
  if ((p.array() < 0).any()) throw InvalidInputError("approx likelihood: negative probability");
}

Mat covariance_of(const Mat& a, const Vec& p, int n, double eps) {
  Vec q = a * p;
  Mat s = a * p.asDiagonal() * a.transpose() - q * q.transpose();
  s.diagonal().array() += eps;
  return n * s;
}

}  // namespace

StabilizedGaussian build_stabilized_gaussian(const ConfigurationMatrix& m, int size,
                                             const Vec& p, double eps) {
  PoolObservation tmp;
  tmp.size = size;
  tmp.counts = IntVec::Zero(m.rows());
  tmp.matrix = std::make_shared<ConfigurationMatrix>(m);
  std::vector<int> rows;
  Workspace w = informative_rows(tmp, &rows);
  check_p(p, m.haplotype_count());
  StabilizedGaussian out;
  out.mean = size * (w.a * p);
  out.covariance = covariance_of(w.a, p, size, eps);
  out.rows = std::move(rows);
  return out;
}

double approx_log_likelihood(const PoolObservation& pool, const Vec& p, double eps) {
  return approx_log_likelihood_with_gradient(pool, p, eps).first;
}

Vec approx_log_likelihood_gradient(const PoolObservation& pool, const Vec& p, double eps) {
  return approx_log_likelihood_with_gradient(pool, p, eps).second;
}

std::pair<double, Vec> approx_log_likelihood_with_gradient(const PoolObservation& pool,
                                                           const Vec& p, double eps) {
  Workspace w = informative_rows(pool);
  check_p(p, pool.matrix->haplotype_count());
  const int r = static_cast<int>(w.a.rows());
  const int h = static_cast<int>(w.a.cols());
  if (r == 0) return {0.0, Vec::Zero(h)};
  const double n = w.size;

  Mat c = covariance_of(w.a, p, w.size, eps);
  Eigen::LLT<Mat> llt(c);
  if (llt.info() != Eigen::Success)
    throw NumericalError("approx likelihood: covariance not positive definite");

  Vec q = w.a * p;
  Vec d = w.y - n * q;
  Vec alpha = llt.solve(d);
  double logdet = 0.0;
  for (int i = 0; i < r; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  const double value =
      -0.5 * r * std::log(2.0 * std::numbers::pi) - 0.5 * logdet - 0.5 * d.dot(alpha);

  // dC/dp_h = n (a_h a_h^T - a_h q^T - q a_h^T);  dmean/dp_h = n a_h.
  Mat cinv = llt.solve(Mat::Identity(r, r));
  Vec t1 = (w.a.transpose() * cinv).cwiseProduct(w.a.transpose()).rowwise().sum();
  Vec t2 = w.a.transpose() * (cinv * q);
  Vec s = w.a.transpose() * alpha;
  const double qa = q.dot(alpha);
  Vec grad = -0.5 * n * (t1 - 2.0 * t2).array() + n * s.array() +
             0.5 * n * (s.array().square() - 2.0 * s.array() * qa);
  return {value, std::move(grad)};
}

}  // namespace poolfreq
