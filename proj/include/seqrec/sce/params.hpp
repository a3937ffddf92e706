#pragma once

#include <cstddef>

namespace seqrec::sce {

struct BucketParams {
  std::size_t n_buckets = 1;
  std::size_t bucket_x = 1;
};

// b_x = round(alpha * sqrt(s * l_bar * beta)), n_b = round(alpha * sqrt(s * l / beta)),
// where l_bar is the mean number of interactions per user. beta = n_b / b_x
// trades bucket count against bucket width; alpha^2 = n_b b_x / (s l_bar) is
// the oversampling factor. Results are clamped to b_x in [1, s*l], n_b >= 1.
// Throws ParameterError on non-positive inputs.
BucketParams derive_bucket_params(std::size_t batch_size, std::size_t seq_len, double mean_len,
                                  double alpha, double beta);

}  // namespace seqrec::sce
