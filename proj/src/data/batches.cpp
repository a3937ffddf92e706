#include "seqrec/data/batches.hpp"

#include <algorithm>
#include <numeric>

#include "seqrec/errors.hpp"

namespace seqrec::data {

std::size_t Batch::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void fill_training_row(std::span<const Index> sequence, std::size_t seq_len,
                       std::span<Index> inputs, std::span<Index> targets,
                       std::span<std::uint8_t> mask) {
  const std::size_t keep = std::min(sequence.size(), seq_len + 1);
  const auto recent = sequence.subspan(sequence.size() - keep);
  const std::size_t pairs = keep == 0 ? 0 : keep - 1;
  const std::size_t pad = seq_len - pairs;
  for (std::size_t i = 0; i < pairs; ++i) {
    inputs[pad + i] = recent[i];
    targets[pad + i] = recent[i + 1];
    mask[pad + i] = 1;
  }
}

std::vector<Batch> make_batches(const std::vector<std::vector<Index>>& sequences,
                                std::size_t batch_size, std::size_t seq_len, num::Rng& rng) {
  if (batch_size == 0 || seq_len == 0) throw ParameterError("make_batches: s and l must be >= 1");
  std::vector<std::size_t> order;
  for (std::size_t u = 0; u < sequences.size(); ++u) {
    if (sequences[u].size() >= 2) order.push_back(u);
  }
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t rows = std::min(batch_size, order.size() - start);
    Batch b;
    b.batch_size = rows;
    b.seq_len = seq_len;
    b.inputs.assign(rows * seq_len, 0);
    b.targets.assign(rows * seq_len, 0);
    b.mask.assign(rows * seq_len, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t u = order[start + r];
      b.sources.push_back(u);
      const std::size_t off = r * seq_len;
      fill_training_row(sequences[u], seq_len, std::span(b.inputs).subspan(off, seq_len),
                        std::span(b.targets).subspan(off, seq_len),
                        std::span(b.mask).subspan(off, seq_len));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

Batch pack_histories(std::span<const std::span<const Index>> histories, std::size_t seq_len) {
  if (seq_len == 0) throw ParameterError("pack_histories: l must be >= 1");
  Batch b;
  b.batch_size = histories.size();
  b.seq_len = seq_len;
  b.inputs.assign(b.rows(), 0);
  b.targets.assign(b.rows(), 0);
  b.mask.assign(b.rows(), 0);
  for (std::size_t r = 0; r < histories.size(); ++r) {
    const auto h = histories[r];
    const std::size_t keep = std::min(h.size(), seq_len);
    const std::size_t pad = seq_len - keep;
    for (std::size_t i = 0; i < keep; ++i) {
      b.inputs[r * seq_len + pad + i] = h[h.size() - keep + i];
      b.mask[r * seq_len + pad + i] = 1;
    }
    b.sources.push_back(r);
  }
  return b;
}

}  // namespace seqrec::data
