#pragma once

#include "poolfreq/types.hpp"

namespace poolfreq {

// Log-ratio chart of the simplex with the last component as reference:
// x_k = log(p_k / p_H) for k < H. Keeps samplers strictly interior.

Vec alr_forward(const Vec& p);   // H -> H-1; requires interior p
Vec alr_inverse(const Vec& x);   // H-1 -> H, numerically stable softmax

// log |det d p / d x| = sum_h log p_h.
double alr_log_jacobian(const Vec& p);

// Pull a gradient in p back to the chart: given dL/dp over all H
// components, returns dL/dx (length H-1).
Vec alr_chain_gradient(const Vec& p, const Vec& grad_p);

}  // namespace poolfreq
