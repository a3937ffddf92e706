#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::losses {

using num::Index;

// k sampled negative item ids per position, row-major [positions x k].
// Rows of padded positions (target 0) are all zero.
struct NegativeSet {
  std::size_t positions = 0;
  std::size_t k = 0;
  std::vector<Index> items;

  Index at(std::size_t position, std::size_t j) const { return items[position * k + j]; }
  std::span<const Index> row(std::size_t position) const {
    return {items.data() + position * k, k};
  }
};

// For every position with a target in [1, C], draws k items independently
// and uniformly from {1..C} \ {target} (with replacement across the k draws).
// Positions whose target is 0 are padding and get an all-zero row.
// Throws ParameterError if k == 0 or k > C - 1.
NegativeSet sample_negatives(std::span<const Index> targets, std::size_t k,
                             std::size_t catalog_size, num::Rng& rng);

}  // namespace seqrec::losses
