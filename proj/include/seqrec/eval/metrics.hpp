#pragma once

// Unsampled ranking metrics over the full catalog with one relevant item
// per user.

#include <array>
#include <cstddef>
#include <json.hpp>
#include <span>
#include <vector>

#include "seqrec/numerics/tensor.hpp"

namespace seqrec::eval {

using num::Index;
using num::Real;

inline constexpr std::array<std::size_t, 3> kCutoffs{1, 5, 10};

// 1/log2(1 + rank) when rank <= k, else 0. rank is 1-based.
Real ndcg_at_k(std::size_t rank, std::size_t k);
Real hr_at_k(std::size_t rank, std::size_t k);
// |union of lists| / catalog_size.
Real coverage(const std::vector<std::vector<Index>>& top_lists, std::size_t catalog_size);

// scores[c - 1] belongs to item c. Excluded items are removed from the
// ranking; ties go to the lower item id.
std::vector<Index> rank_items(std::span<const Real> scores, std::span<const Index> exclusions);
// Position of target in rank_items order, computed without sorting. The
// target itself is never excluded.
std::size_t target_rank(std::span<const Real> scores, Index target,
                        std::span<const Index> exclusions);
// First k entries of rank_items.
std::vector<Index> top_items(std::span<const Real> scores, std::size_t k,
                             std::span<const Index> exclusions);

struct MetricsReport {
  std::array<Real, 3> ndcg{};
  std::array<Real, 3> hr{};
  std::array<Real, 3> cov{};
  std::size_t n_users = 0;

  Real ndcg_at(std::size_t k) const;
  Real hr_at(std::size_t k) const;
  Real cov_at(std::size_t k) const;
};

// Aggregates per-user target ranks and top-max(K) lists.
MetricsReport summarize(std::span<const std::size_t> ranks,
                        const std::vector<std::vector<Index>>& top_lists,
                        std::size_t catalog_size);

nlohmann::json report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace seqrec::eval
