#pragma once

#include <cstddef>
#include <cstdint>

#include "seqrec/data/interactions.hpp"

namespace seqrec::data {

// Markov log with planted cluster structure. Items are split into clusters
// of cluster_size consecutive ids; a fixed random permutation maps each
// cluster to a successor cluster. After item i the next item is drawn
// uniformly from the successor cluster of i with probability follow_prob,
// otherwise uniformly from the whole catalog. Per-user timestamps are
// sorted uniform integers in [0, max_timestamp].
struct PlantedConfig {
  std::size_t catalog_size = 2000;
  std::size_t users = 2000;
  std::size_t cluster_size = 8;
  double follow_prob = 0.9;
  std::size_t min_length = 4;
  std::size_t max_length = 8;
  std::int64_t max_timestamp = 1'000'000;
  std::uint64_t seed = 0;
};

// Raw ids are "u<k>" and "i<k>" with 1-based k.
InteractionLog make_planted_log(const PlantedConfig& config);

}  // namespace seqrec::data
