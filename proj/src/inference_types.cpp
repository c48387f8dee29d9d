#include "poolfreq/inference_types.hpp"

#include "poolfreq/errors.hpp"

namespace poolfreq {

Vec PosteriorDraws::mean() const {
  if (freq.empty()) throw InvalidInputError("PosteriorDraws::mean: no chains");
  Vec acc = Vec::Zero(freq.front().cols());
  long long total = 0;
  for (const auto& m : freq) {
    acc += m.colwise().sum().transpose();
    total += m.rows();
  }
  return acc / static_cast<double>(total);
}

}  // namespace poolfreq
