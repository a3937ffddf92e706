#pragma once

// Scalable Cross-Entropy.
//
// Bucket centers (random, or Mix combinations of the batch outputs) pick the
// top-b_x outputs and top-b_y catalog items by dot product. Inside each
// bucket the loss is a cross-entropy over the positive logit plus the b_y
// bucket logits, with the row's own positive masked to -inf among the
// bucket items. An output placed in several buckets keeps its largest loss;
// the final value is the mean over outputs placed at least once.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"
#include "seqrec/sce/buckets.hpp"

namespace seqrec::sce {

struct SceConfig {
  std::size_t n_buckets = 1;
  std::size_t bucket_x = 1;
  std::size_t bucket_y = 1;
  bool use_mix = true;
  // Build Mix centers from the catalog rows instead of the outputs.
  bool mix_catalog = false;
  Real alpha = 2.0;
  Real beta = 1.0;

  // Throws ParameterError on zero counts or non-positive alpha/beta.
  void validate() const;
};

// kStrict rejects bucket_x > #valid outputs (and bucket_y > C);
// kClamp shrinks them, which is what training uses for short batches.
enum class SizePolicy { kStrict, kClamp };

struct SceOutput {
  Tensor value;
  Real unique_selection_fraction = 0.0;
  Real correct_logit_fraction = 0.0;
  std::size_t covered_positions = 0;
  // Max-aggregated loss per output row; NaN where the row is in no bucket.
  std::vector<Real> per_position;
  BucketAssignment assignment;
};

SceOutput sce_loss(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                   const SceConfig& config, std::span<const std::uint8_t> valid, num::Rng& rng,
                   SizePolicy policy = SizePolicy::kStrict);

// Loss for a fixed assignment (selection indices are constants of the graph).
SceOutput sce_loss_with_assignment(const Tensor& x, const Tensor& y,
                                   std::span<const Index> targets,
                                   std::span<const std::uint8_t> valid,
                                   const BucketAssignment& assignment);

}  // namespace seqrec::sce
