#include "poolfreq/simplex_transform.hpp"

#include <cmath>

#include "poolfreq/errors.hpp"

namespace poolfreq {

Vec alr_forward(const Vec& p) {
  const int h = static_cast<int>(p.size());
  if (h < 2) throw InvalidInputError("alr_forward: need at least two components");
  if ((p.array() <= 0).any()) throw InvalidInputError("alr_forward: p must be interior");
  Vec x(h - 1);
  const double ref = std::log(p(h - 1));
  for (int k = 0; k < h - 1; ++k) x(k) = std::log(p(k)) - ref;
  return x;
}

Vec alr_inverse(const Vec& x) {
  const int h = static_cast<int>(x.size()) + 1;
  Vec full(h);
  full.head(h - 1) = x;
  full(h - 1) = 0.0;
  const double m = full.maxCoeff();
  Vec e = (full.array() - m).exp();
  return e / e.sum();
}

double alr_log_jacobian(const Vec& p) { return p.array().log().sum(); }

Vec alr_chain_gradient(const Vec& p, const Vec& grad_p) {
  const int h = static_cast<int>(p.size());
  if (grad_p.size() != h) throw InvalidInputError("alr_chain_gradient: dimension mismatch");
  const double total = p.dot(grad_p);
  Vec out(h - 1);
  for (int k = 0; k < h - 1; ++k) out(k) = p(k) * (grad_p(k) - total);
  return out;
}

}  // namespace poolfreq
