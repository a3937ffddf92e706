#pragma once

#include <cstddef>
#include <span>

#include "seqrec/numerics/tensor.hpp"

namespace seqrec::num {

// A run of packed rows belonging to one sequence, in time order.
struct Segment {
  std::size_t begin = 0;
  std::size_t length = 0;
};

// Multi-head scaled dot-product attention with a causal mask inside each
// segment: row i of a segment attends to rows 0..i of the same segment.
// q, k, v are [n x d] with d divisible by n_heads; head h owns columns
// [h*d/n_heads, (h+1)*d/n_heads). Rows outside every segment output zero.
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::span<const Segment> segments, std::size_t n_heads);

}  // namespace seqrec::num
