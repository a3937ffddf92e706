#include "seqrec/sce/params.hpp"

#include <algorithm>
#include <cmath>

#include "seqrec/errors.hpp"

namespace seqrec::sce {

BucketParams derive_bucket_params(std::size_t batch_size, std::size_t seq_len, double mean_len,
                                  double alpha, double beta) {
  if (batch_size == 0 || seq_len == 0 || !(mean_len > 0.0) || !(alpha > 0.0) || !(beta > 0.0)) {
    throw ParameterError("derive_bucket_params: all inputs must be positive");
  }
  const double s = static_cast<double>(batch_size);
  const double l = static_cast<double>(seq_len);
  const double bx = std::round(alpha * std::sqrt(s * mean_len * beta));
  const double nb = std::round(alpha * std::sqrt(s * l / beta));
  BucketParams p;
  p.bucket_x = static_cast<std::size_t>(std::clamp(bx, 1.0, s * l));
  p.n_buckets = static_cast<std::size_t>(std::max(nb, 1.0));
  return p;
}

}  // namespace seqrec::sce
