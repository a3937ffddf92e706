#include "seqrec/sce/buckets.hpp"

#include <limits>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/eigen.hpp"
#include "seqrec/numerics/topk.hpp"

namespace seqrec::sce {
namespace {

using num::Buffer;
using num::as_matrix;

std::size_t count_valid(std::span<const std::uint8_t> valid) {
  std::size_t n = 0;
  for (auto v : valid) n += v ? 1 : 0;
  return n;
}

}  // namespace

Tensor generate_bucket_centers(std::size_t n_buckets, std::size_t dim, num::Rng& rng) {
  if (n_buckets == 0) throw ParameterError("generate_bucket_centers: n_buckets must be >= 1");
  return Tensor::randn({n_buckets, dim}, rng);
}

Tensor mix_bucket_centers(const Tensor& x, std::size_t n_buckets, num::Rng& rng,
                          std::span<const std::uint8_t> valid) {
  if (x.rank() != 2 || valid.size() != x.rows()) {
    throw DimensionError("mix_bucket_centers: need X [n x d] and one mask entry per row");
  }
  if (n_buckets == 0) throw ParameterError("mix_bucket_centers: n_buckets must be >= 1");
  if (count_valid(valid) == 0) throw EmptyBatchError("mix_bucket_centers: every row is padded");
  const std::size_t n = x.rows(), d = x.cols();
  Buffer omega(n_buckets * n, 0.0);
  for (std::size_t b = 0; b < n_buckets; ++b)
    for (std::size_t p = 0; p < n; ++p)
      if (valid[p]) omega[b * n + p] = rng.normal();
  Buffer centers(n_buckets * d);
  as_matrix(centers.data(), n_buckets, d).noalias() =
      as_matrix(omega.data(), n_buckets, n) * as_matrix(x.data().data(), n, d);
  return Tensor({n_buckets, d}, std::move(centers));
}

Tensor mix_with(const Tensor& omega, const Tensor& rows) {
  if (omega.rank() != 2 || rows.rank() != 2 || omega.cols() != rows.rows()) {
    throw DimensionError("mix_with: omega [n_b x n] needs rows [n x d]");
  }
  const std::size_t nb = omega.rows(), n = rows.rows(), d = rows.cols();
  Buffer centers(nb * d);
  as_matrix(centers.data(), nb, d).noalias() =
      as_matrix(omega.data().data(), nb, n) * as_matrix(rows.data().data(), n, d);
  return Tensor({nb, d}, std::move(centers));
}

Tensor mix_catalog_centers(const Tensor& y, std::size_t n_buckets, num::Rng& rng) {
  if (y.rank() != 2) throw DimensionError("mix_catalog_centers: need Y [C x d]");
  if (n_buckets == 0) throw ParameterError("mix_catalog_centers: n_buckets must be >= 1");
  const std::size_t c = y.rows(), d = y.cols();
  Buffer omega(n_buckets * c);
  for (auto& w : omega) w = rng.normal();
  Buffer centers(n_buckets * d);
  as_matrix(centers.data(), n_buckets, d).noalias() =
      as_matrix(omega.data(), n_buckets, c) * as_matrix(y.data().data(), c, d);
  return Tensor({n_buckets, d}, std::move(centers));
}

Projections project(const Tensor& centers, const Tensor& x, const Tensor& y,
                    std::span<const std::uint8_t> valid) {
  if (centers.rank() != 2 || x.rank() != 2 || y.rank() != 2 || centers.cols() != x.cols() ||
      x.cols() != y.cols()) {
    throw DimensionError("project: centers, X and Y must share the embedding width");
  }
  if (valid.size() != x.rows()) throw DimensionError("project: one mask entry per output row");
  const std::size_t nb = centers.rows(), d = centers.cols(), n = x.rows(), c = y.rows();
  Projections proj{Buffer(nb * n), Buffer(nb * c)};
  auto bm = as_matrix(centers.data().data(), nb, d);
  as_matrix(proj.outputs.data(), nb, n).noalias() = bm * as_matrix(x.data().data(), n, d).transpose();
  as_matrix(proj.catalog.data(), nb, c).noalias() = bm * as_matrix(y.data().data(), c, d).transpose();
  constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t p = 0; p < n; ++p)
      if (!valid[p]) proj.outputs[b * n + p] = kNegInf;
  return proj;
}

BucketAssignment assign_from_projections(const Projections& proj, std::size_t n_buckets,
                                         std::size_t n_outputs, std::size_t catalog,
                                         std::size_t bucket_x, std::size_t bucket_y,
                                         std::size_t valid_count) {
  if (bucket_x == 0 || bucket_x > valid_count) {
    throw ParameterError("assign_buckets: bucket_x=" + std::to_string(bucket_x) +
                         " must lie in [1, " + std::to_string(valid_count) + "] (valid outputs)");
  }
  if (bucket_y == 0 || bucket_y > catalog) {
    throw ParameterError("assign_buckets: bucket_y=" + std::to_string(bucket_y) +
                         " must lie in [1, " + std::to_string(catalog) + "]");
  }
  BucketAssignment a;
  a.n_buckets = n_buckets;
  a.bucket_x = bucket_x;
  a.bucket_y = bucket_y;
  a.outputs.reserve(n_buckets * bucket_x);
  a.items.reserve(n_buckets * bucket_y);
  for (std::size_t b = 0; b < n_buckets; ++b) {
    auto xs = num::top_k({proj.outputs.data() + b * n_outputs, n_outputs}, bucket_x);
    for (auto i : xs) a.outputs.push_back(static_cast<Index>(i));
    auto ys = num::top_k({proj.catalog.data() + b * catalog, catalog}, bucket_y);
    for (auto j : ys) a.items.push_back(static_cast<Index>(j) + 1);
  }
  return a;
}

BucketAssignment assign_buckets(const Tensor& centers, const Tensor& x, const Tensor& y,
                                std::size_t bucket_x, std::size_t bucket_y,
                                std::span<const std::uint8_t> valid) {
  num::NoGradGuard no_grad;
  auto proj = project(centers, x, y, valid);
  return assign_from_projections(proj, centers.rows(), x.rows(), y.rows(), bucket_x, bucket_y,
                                 count_valid(valid));
}

}  // namespace seqrec::sce
