#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "seqrec/harness/memory_estimate.hpp"

namespace seqrec::harness {

struct LossStep {
  num::Tensor value;
  // SCE only.
  std::optional<Real> unique_selection_fraction;
  std::optional<Real> correct_logit_fraction;
};

// Dispatches to the selected loss. Sampled losses draw fresh negatives and
// SCE fresh bucket centers from rng.
LossStep compute_loss(const LossSpec& spec, const num::Tensor& x, const num::Tensor& y,
                      std::span<const num::Index> targets, std::span<const std::uint8_t> valid,
                      num::Rng& rng, sce::SizePolicy policy = sce::SizePolicy::kClamp);

}  // namespace seqrec::harness
