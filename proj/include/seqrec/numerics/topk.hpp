#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "seqrec/numerics/tensor.hpp"

namespace seqrec::num {

// Indices of the k largest values, ordered by descending value; equal values
// are ordered by ascending index. Never recorded on the tape.
// Throws ParameterError unless 1 <= k <= values.size().
std::vector<std::size_t> top_k(std::span<const Real> values, std::size_t k);

}  // namespace seqrec::num
