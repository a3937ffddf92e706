#pragma once

#include <cstddef>
#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>

#include "seqrec/harness/config.hpp"

namespace seqrec::harness {

struct LossSpec {
  LossKind kind = LossKind::kCe;
  std::size_t negatives = 1;
  // n_buckets, bucket_x, bucket_y already resolved.
  sce::SceConfig sce;
};

// Analytic element counts for the loss stage of one step over s*l outputs:
//   CE:            logits s*l*C
//   BCE:           logits 2*s*l
//   BCE+, CE-:     logits s*l*(k+1), auxiliary s*l*k negative ids
//   SCE:           logits n_b*b_x*b_y + n_b*b_x positives,
//                  auxiliary n_b*(s*l + C) projection scores
struct MemoryEstimate {
  std::size_t logits_elements = 0;
  std::size_t auxiliary_elements = 0;
  std::optional<std::int64_t> measured_peak_bytes;

  std::size_t logits_bytes() const noexcept { return logits_elements * num::kAccountingBytesPerElement; }
  std::size_t auxiliary_bytes() const noexcept {
    return auxiliary_elements * num::kAccountingBytesPerElement;
  }
  std::size_t total_bytes() const noexcept { return logits_bytes() + auxiliary_bytes(); }
};

MemoryEstimate estimate_memory(const LossSpec& spec, std::size_t batch_size, std::size_t seq_len,
                               std::size_t catalog_size, std::size_t dim);

// Peak transient bytes of one loss forward + backward on random X [s*l x d]
// and Y [C x d] with every position valid. Gradient buffers of X and Y are
// allocated before measuring, so the figure covers only what the loss
// itself materializes.
std::int64_t measure_loss_peak_bytes(const LossSpec& spec, std::size_t batch_size,
                                     std::size_t seq_len, std::size_t catalog_size,
                                     std::size_t dim, std::uint64_t seed);

// Decimal units with one decimal place: 102400000000 -> "102.4 GB".
std::string format_bytes(double bytes);

nlohmann::json estimate_to_json(const MemoryEstimate& estimate);

}  // namespace seqrec::harness
