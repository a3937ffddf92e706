#include "seqrec/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <unordered_set>

#include "seqrec/errors.hpp"

namespace seqrec::eval {
namespace {

std::size_t cutoff_slot(std::size_t k) {
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    if (kCutoffs[i] == k) return i;
  }
  throw ParameterError("metrics are reported for K in {1, 5, 10}, not " + std::to_string(k));
}

std::vector<std::uint8_t> exclusion_mask(std::size_t catalog, std::span<const Index> exclusions) {
  std::vector<std::uint8_t> mask(catalog, 0);
  for (Index e : exclusions) {
    if (e < 1 || static_cast<std::size_t>(e) > catalog) continue;
    mask[e - 1] = 1;
  }
  return mask;
}

}  // namespace

Real ndcg_at_k(std::size_t rank, std::size_t k) {
  if (k == 0) throw ParameterError("ndcg_at_k: K must be >= 1");
  if (rank == 0 || rank > k) return 0.0;
  return 1.0 / std::log2(1.0 + static_cast<Real>(rank));
}

Real hr_at_k(std::size_t rank, std::size_t k) {
  if (k == 0) throw ParameterError("hr_at_k: K must be >= 1");
  return rank >= 1 && rank <= k ? 1.0 : 0.0;
}

Real coverage(const std::vector<std::vector<Index>>& top_lists, std::size_t catalog_size) {
  if (catalog_size == 0) throw ParameterError("coverage: empty catalog");
  std::unordered_set<Index> seen;
  for (const auto& list : top_lists) seen.insert(list.begin(), list.end());
  return static_cast<Real>(seen.size()) / static_cast<Real>(catalog_size);
}

std::vector<Index> rank_items(std::span<const Real> scores, std::span<const Index> exclusions) {
  auto excluded = exclusion_mask(scores.size(), exclusions);
  std::vector<Index> items;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (!excluded[c]) items.push_back(static_cast<Index>(c + 1));
  }
  std::stable_sort(items.begin(), items.end(),
                   [&](Index a, Index b) { return scores[a - 1] > scores[b - 1]; });
  return items;
}

std::size_t target_rank(std::span<const Real> scores, Index target,
                        std::span<const Index> exclusions) {
  if (target < 1 || static_cast<std::size_t>(target) > scores.size()) {
    throw DataError("target_rank: target outside [1, C]");
  }
  auto excluded = exclusion_mask(scores.size(), exclusions);
  const std::size_t t = static_cast<std::size_t>(target - 1);
  const Real st = scores[t];
  std::size_t ahead = 0;
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (c == t || excluded[c]) continue;
    if (scores[c] > st || (scores[c] == st && c < t)) ++ahead;
  }
  return ahead + 1;
}

std::vector<Index> top_items(std::span<const Real> scores, std::size_t k,
                             std::span<const Index> exclusions) {
  auto excluded = exclusion_mask(scores.size(), exclusions);
  std::vector<Index> items;
  items.reserve(scores.size());
  for (std::size_t c = 0; c < scores.size(); ++c) {
    if (!excluded[c]) items.push_back(static_cast<Index>(c + 1));
  }
  k = std::min(k, items.size());
  auto before = [&](Index a, Index b) {
    return scores[a - 1] > scores[b - 1] || (scores[a - 1] == scores[b - 1] && a < b);
  };
  std::partial_sort(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(k), items.end(),
                    before);
  items.resize(k);
  return items;
}

Real MetricsReport::ndcg_at(std::size_t k) const { return ndcg[cutoff_slot(k)]; }
Real MetricsReport::hr_at(std::size_t k) const { return hr[cutoff_slot(k)]; }
Real MetricsReport::cov_at(std::size_t k) const { return cov[cutoff_slot(k)]; }

MetricsReport summarize(std::span<const std::size_t> ranks,
                        const std::vector<std::vector<Index>>& top_lists,
                        std::size_t catalog_size) {
  if (ranks.size() != top_lists.size()) {
    throw DimensionError("summarize: one rank and one top list per user");
  }
  MetricsReport r;
  r.n_users = ranks.size();
  if (ranks.empty()) return r;
  const auto n = static_cast<Real>(ranks.size());
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    const std::size_t k = kCutoffs[i];
    Real nd = 0.0, h = 0.0;
    for (auto rank : ranks) {
      nd += ndcg_at_k(rank, k);
      h += hr_at_k(rank, k);
    }
    r.ndcg[i] = nd / n;
    r.hr[i] = h / n;
    std::vector<std::vector<Index>> cut;
    cut.reserve(top_lists.size());
    for (const auto& list : top_lists) {
      cut.emplace_back(list.begin(), list.begin() + std::min(k, list.size()));
    }
    r.cov[i] = coverage(cut, catalog_size);
  }
  return r;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j{{"n_users", r.n_users}};
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    const std::string k = std::to_string(kCutoffs[i]);
    j["ndcg@" + k] = r.ndcg[i];
    j["hr@" + k] = r.hr[i];
    j["cov@" + k] = r.cov[i];
  }
  return j;
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.n_users = j.value("n_users", std::size_t{0});
  for (std::size_t i = 0; i < kCutoffs.size(); ++i) {
    const std::string k = std::to_string(kCutoffs[i]);
    r.ndcg[i] = j.value("ndcg@" + k, 0.0);
    r.hr[i] = j.value("hr@" + k, 0.0);
    r.cov[i] = j.value("cov@" + k, 0.0);
  }
  return r;
}

}  // namespace seqrec::eval
