#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "seqrec/data/interactions.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace seqrec::data {

using num::Index;

// Everything the model may see before predicting `target`.
struct Holdout {
  std::string user;
  std::vector<Index> history;
  Index target = 0;
};

struct SequenceDataset {
  std::size_t catalog_size = 0;
  // item_ids[c - 1] is the raw id of dense item c.
  std::vector<std::string> item_ids;
  std::vector<std::string> train_users;
  std::vector<std::vector<Index>> train;
  std::vector<Holdout> validation;
  std::vector<Holdout> test;
  std::int64_t split_timestamp = 0;

  // Mean length of the training sequences.
  double mean_train_length() const;
};

enum class SplitProtocol {
  // Users active at or after the global quantile timestamp become test
  // users and leave the training set.
  kTemporal,
  // Every user is held out: last item for test, second-to-last for
  // validation, the rest for training.
  kLeaveOneOut,
};

struct SplitOptions {
  double quantile = 0.95;
  SplitProtocol protocol = SplitProtocol::kTemporal;
};

// Nearest-rank quantile: the ceil(q * n)-th smallest value (1-based, at
// least the first). Throws SplitError on an empty input or q outside (0, 1].
std::int64_t quantile_timestamp(std::vector<std::int64_t> timestamps, double q);

// Per-user sequences are ordered by timestamp with file order breaking ties.
// Item ids are remapped to 1..C in order of first appearance in that order.
// Throws SplitError when the log is empty, no user is held out, or the
// training part ends up empty.
SequenceDataset temporal_split(const InteractionLog& log, const SplitOptions& options = {});

}  // namespace seqrec::data
