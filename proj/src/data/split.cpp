#include "seqrec/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "seqrec/errors.hpp"

namespace seqrec::data {

double SequenceDataset::mean_train_length() const {
  if (train.empty()) return 0.0;
  std::size_t total = 0;
  for (const auto& seq : train) total += seq.size();
  return static_cast<double>(total) / static_cast<double>(train.size());
}

std::int64_t quantile_timestamp(std::vector<std::int64_t> timestamps, double q) {
  if (timestamps.empty()) throw SplitError("quantile of an empty timestamp list");
  if (!(q > 0.0) || q > 1.0) throw SplitError("split quantile must lie in (0, 1]");
  const double n = static_cast<double>(timestamps.size());
  // The epsilon keeps q * n = 19.000000000000004 at rank 19.
  auto rank = static_cast<std::size_t>(std::ceil(q * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, timestamps.size());
  std::nth_element(timestamps.begin(), timestamps.begin() + (rank - 1), timestamps.end());
  return timestamps[rank - 1];
}

SequenceDataset temporal_split(const InteractionLog& log, const SplitOptions& options) {
  if (log.records.empty()) throw SplitError("cannot split an empty interaction log");
  const auto& records = log.records;

  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return records[a].timestamp < records[b].timestamp;
  });

  SequenceDataset ds;
  std::unordered_map<std::string, Index> item_index;
  std::unordered_map<std::string, std::size_t> user_slot;
  std::vector<std::string> users;
  std::vector<std::vector<std::size_t>> per_user;
  for (std::size_t idx : order) {
    const auto& r = records[idx];
    if (item_index.emplace(r.item, static_cast<Index>(ds.item_ids.size() + 1)).second) {
      ds.item_ids.push_back(r.item);
    }
    auto [it, fresh] = user_slot.emplace(r.user, users.size());
    if (fresh) {
      users.push_back(r.user);
      per_user.emplace_back();
    }
    per_user[it->second].push_back(idx);
  }
  ds.catalog_size = ds.item_ids.size();

  auto items_of = [&](const std::vector<std::size_t>& recs) {
    std::vector<Index> items;
    items.reserve(recs.size());
    for (std::size_t idx : recs) items.push_back(item_index.at(records[idx].item));
    return items;
  };
  auto hold_out = [&](const std::string& user, const std::vector<Index>& items) {
    if (items.size() >= 2) {
      ds.test.push_back({user, {items.begin(), items.end() - 1}, items.back()});
    }
    if (items.size() >= 3) {
      ds.validation.push_back({user, {items.begin(), items.end() - 2}, items[items.size() - 2]});
    }
  };

  if (options.protocol == SplitProtocol::kLeaveOneOut) {
    ds.split_timestamp = std::numeric_limits<std::int64_t>::max();
    for (std::size_t u = 0; u < users.size(); ++u) {
      auto items = items_of(per_user[u]);
      hold_out(users[u], items);
      if (items.size() > 2) {
        ds.train_users.push_back(users[u]);
        ds.train.emplace_back(items.begin(), items.end() - 2);
      }
    }
  } else {
    std::vector<std::int64_t> stamps;
    stamps.reserve(records.size());
    for (const auto& r : records) stamps.push_back(r.timestamp);
    ds.split_timestamp = quantile_timestamp(std::move(stamps), options.quantile);
    for (std::size_t u = 0; u < users.size(); ++u) {
      auto items = items_of(per_user[u]);
      // Sequences are time ordered, so the last record decides membership.
      const bool is_test = records[per_user[u].back()].timestamp >= ds.split_timestamp;
      if (is_test) {
        hold_out(users[u], items);
      } else {
        ds.train_users.push_back(users[u]);
        ds.train.push_back(std::move(items));
      }
    }
  }

  if (ds.test.empty()) {
    throw SplitError(
        "no test users: every held-out candidate has fewer than 2 interactions or no activity at "
        "or after the split timestamp; lower the quantile or check timestamps");
  }
  if (ds.train.empty()) {
    throw SplitError(
        "training set is empty: every user has activity at or after the split timestamp "
        "(e.g. identical timestamps); raise the quantile or use the leave-one-out protocol");
  }
  return ds;
}

}  // namespace seqrec::data
