#pragma once

#include <cstddef>
#include <vector>

#include "seqrec/backbone/model.hpp"
#include "seqrec/data/split.hpp"
#include "seqrec/eval/metrics.hpp"

namespace seqrec::eval {

struct EvalOptions {
  // Remove the user's earlier items (other than the target) from ranking.
  bool exclude_history = true;
  std::size_t batch_size = 256;
  // Histories are cut to their most recent seq_len items.
  std::size_t seq_len = 200;
};

struct EvalResult {
  MetricsReport report;
  std::vector<std::size_t> ranks;
  std::vector<std::vector<Index>> top_lists;
};

// Scores every catalog item for each holdout from the output at the last
// history position, in eval mode and without gradient tracking.
EvalResult evaluate(const backbone::Model& model, const std::vector<data::Holdout>& holdouts,
                    const EvalOptions& options);

}  // namespace seqrec::eval
