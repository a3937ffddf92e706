#include "seqrec/harness/loss_step.hpp"

#include <vector>

#include "seqrec/losses/losses.hpp"

namespace seqrec::harness {

LossStep compute_loss(const LossSpec& spec, const num::Tensor& x, const num::Tensor& y,
                      std::span<const num::Index> targets, std::span<const std::uint8_t> valid,
                      num::Rng& rng, sce::SizePolicy policy) {
  LossStep step;
  switch (spec.kind) {
    case LossKind::kCe:
      step.value = losses::full_ce(x, y, targets, valid).value;
      break;
    case LossKind::kSce: {
      auto out = sce::sce_loss(x, y, targets, spec.sce, valid, rng, policy);
      step.value = out.value;
      step.unique_selection_fraction = out.unique_selection_fraction;
      step.correct_logit_fraction = out.correct_logit_fraction;
      break;
    }
    default: {
      // Padded positions carry target 0 and get no negatives.
      std::vector<num::Index> masked(targets.begin(), targets.end());
      for (std::size_t i = 0; i < masked.size(); ++i) {
        if (!valid[i]) masked[i] = 0;
      }
      const std::size_t k = spec.kind == LossKind::kBce ? 1 : spec.negatives;
      const auto negatives = losses::sample_negatives(masked, k, y.rows(), rng);
      if (spec.kind == LossKind::kBce) {
        step.value = losses::bce(x, y, targets, negatives, valid).value;
      } else if (spec.kind == LossKind::kBcePlus) {
        step.value = losses::bce_plus(x, y, targets, negatives, valid).value;
      } else {
        step.value = losses::ce_minus(x, y, targets, negatives, valid).value;
      }
    }
  }
  return step;
}

}  // namespace seqrec::harness
