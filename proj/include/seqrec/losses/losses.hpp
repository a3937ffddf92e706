#pragma once

// Baseline losses over model outputs X [n x d] and catalog embeddings
// Y [C x d]. Item ids are 1-based: item c is row c-1 of Y. Every loss is the
// mean over valid (non-padded) positions of a per-position loss.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/losses/negatives.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::losses {

using num::Real;
using num::Tensor;

struct LossOutput {
  Tensor value;
  std::size_t positions_counted = 0;
  // Per-position loss; NaN at padded positions.
  std::vector<Real> per_position;
};

// -log softmax(X Y^T)[target] averaged over valid positions. Materializes the
// full [n x C] logit tensor (padded rows stay zero and are not computed).
LossOutput full_ce(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                   std::span<const std::uint8_t> valid);

// Same loss starting from an explicit [n x C] logit tensor.
LossOutput ce_from_logits(const Tensor& logits, std::span<const Index> targets,
                          std::span<const std::uint8_t> valid);

// -log sigma(l+) - log(1 - sigma(l-)), exactly one negative per position.
LossOutput bce(const Tensor& x, const Tensor& y, std::span<const Index> targets,
               const NegativeSet& negatives, std::span<const std::uint8_t> valid);

// -log sigma(l+) - sum_j log(1 - sigma(l_j)) over k negatives.
LossOutput bce_plus(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                    const NegativeSet& negatives, std::span<const std::uint8_t> valid);

// -log [exp(l+) / (exp(l+) + sum_j exp(l_j))] over k negatives.
LossOutput ce_minus(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                    const NegativeSet& negatives, std::span<const std::uint8_t> valid);

// log(1 + exp(z)) without overflow.
Real softplus(Real z) noexcept;
Real sigmoid(Real z) noexcept;

}  // namespace seqrec::losses
