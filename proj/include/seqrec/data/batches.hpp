#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::data {

using num::Index;

// s x l row-major item matrices, left-padded with 0. targets[u][i] is the
// item that followed inputs[u][i]; mask marks real (input, target) pairs.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::vector<Index> inputs;
  std::vector<Index> targets;
  std::vector<std::uint8_t> mask;
  // Position of each row's sequence in the source list.
  std::vector<std::size_t> sources;

  std::size_t rows() const noexcept { return batch_size * seq_len; }
  std::size_t valid_count() const noexcept;
};

// Training pairs from one sequence: keeps the most recent l + 1 items,
// inputs are all but the last, targets all but the first.
void fill_training_row(std::span<const Index> sequence, std::size_t seq_len,
                       std::span<Index> inputs, std::span<Index> targets,
                       std::span<std::uint8_t> mask);

// One epoch of training batches. Sequences shorter than 2 are skipped; the
// remaining ones are shuffled with rng and cut into batches of s (the last
// batch may be smaller).
std::vector<Batch> make_batches(const std::vector<std::vector<Index>>& sequences,
                                std::size_t batch_size, std::size_t seq_len, num::Rng& rng);

// Inference layout: the last l items of each history, left-padded, with the
// mask marking real inputs. Targets stay zero.
Batch pack_histories(std::span<const std::span<const Index>> histories, std::size_t seq_len);

}  // namespace seqrec::data
