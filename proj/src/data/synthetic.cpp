#include "seqrec/data/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/rng.hpp"

namespace seqrec::data {

InteractionLog make_planted_log(const PlantedConfig& config) {
  if (config.cluster_size == 0 || config.catalog_size % config.cluster_size != 0) {
    throw ParameterError("planted log: catalog size must be a multiple of the cluster size");
  }
  if (config.min_length == 0 || config.min_length > config.max_length) {
    throw ParameterError("planted log: need 1 <= min_length <= max_length");
  }
  auto rng = num::make_rng(config.seed, num::RngStream::kData);
  const std::size_t clusters = config.catalog_size / config.cluster_size;
  std::vector<std::size_t> successor(clusters);
  std::iota(successor.begin(), successor.end(), 0);
  for (std::size_t i = clusters; i > 1; --i) std::swap(successor[i - 1], successor[rng.below(i)]);

  InteractionLog log;
  for (std::size_t u = 1; u <= config.users; ++u) {
    const std::size_t len =
        config.min_length + rng.below(config.max_length - config.min_length + 1);
    std::vector<std::int64_t> stamps(len);
    for (auto& t : stamps) {
      t = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(config.max_timestamp) + 1));
    }
    std::sort(stamps.begin(), stamps.end());
    std::size_t item = rng.below(config.catalog_size);
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) {
        if (rng.uniform() < config.follow_prob) {
          const std::size_t next = successor[item / config.cluster_size];
          item = next * config.cluster_size + rng.below(config.cluster_size);
        } else {
          item = rng.below(config.catalog_size);
        }
      }
      log.records.push_back(
          {"u" + std::to_string(u), "i" + std::to_string(item + 1), stamps[i]});
    }
  }
  return log;
}

}  // namespace seqrec::data
