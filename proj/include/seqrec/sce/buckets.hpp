#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::sce {

using num::Index;
using num::Real;
using num::Tensor;

// Which model outputs and catalog items each bucket holds.
//   outputs: [n_buckets x bucket_x] row indices into X (flattened s*l positions)
//   items:   [n_buckets x bucket_y] item ids in [1, C] (row id-1 of Y)
// Indices are distinct within a bucket row and may repeat across buckets.
struct BucketAssignment {
  std::size_t n_buckets = 0;
  std::size_t bucket_x = 0;
  std::size_t bucket_y = 0;
  std::vector<Index> outputs;
  std::vector<Index> items;

  std::span<const Index> outputs_of(std::size_t b) const {
    return {outputs.data() + b * bucket_x, bucket_x};
  }
  std::span<const Index> items_of(std::size_t b) const {
    return {items.data() + b * bucket_y, bucket_y};
  }
};

// B = randn(n_buckets, dim); never tracked.
Tensor generate_bucket_centers(std::size_t n_buckets, std::size_t dim, num::Rng& rng);

// Mix: B = Omega X with Omega [n_buckets x n] i.i.d. N(0,1) on valid columns
// and zero on padded ones. Draws go row by row, skipping padded columns.
// Throws EmptyBatchError when no row is valid.
Tensor mix_bucket_centers(const Tensor& x, std::size_t n_buckets, num::Rng& rng,
                          std::span<const std::uint8_t> valid);

// B = omega * rows for an explicit omega [n_buckets x n]; never tracked.
Tensor mix_with(const Tensor& omega, const Tensor& rows);

// Mix applied to the catalog, B = Omega Y with Omega [n_buckets x C].
Tensor mix_catalog_centers(const Tensor& y, std::size_t n_buckets, num::Rng& rng);

// Projection scores of bucket centers against outputs and catalog, computed
// without gradient tracking. Padded output columns hold -inf.
struct Projections {
  num::Buffer outputs;  // [n_buckets x n]
  num::Buffer catalog;  // [n_buckets x C]
};

Projections project(const Tensor& centers, const Tensor& x, const Tensor& y,
                    std::span<const std::uint8_t> valid);

// Top-bucket_x outputs and top-bucket_y items per bucket by dot product with
// its center. Throws ParameterError if bucket_x exceeds the valid count or
// bucket_y exceeds C.
BucketAssignment assign_buckets(const Tensor& centers, const Tensor& x, const Tensor& y,
                                std::size_t bucket_x, std::size_t bucket_y,
                                std::span<const std::uint8_t> valid);

BucketAssignment assign_from_projections(const Projections& proj, std::size_t n_buckets,
                                         std::size_t n_outputs, std::size_t catalog,
                                         std::size_t bucket_x, std::size_t bucket_y,
                                         std::size_t valid_count);

}  // namespace seqrec::sce
