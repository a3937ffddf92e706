#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "seqrec/eval/metrics.hpp"

namespace seqrec::harness {

struct ParetoPoint {
  std::string config_id;
  std::int64_t peak_bytes = 0;
  double seconds = 0.0;
  double ndcg10 = 0.0;
  eval::MetricsReport metrics;
};

// a dominates b: no more memory, no less NDCG@10, strictly better in one.
bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept;

// Points not dominated by any other, sorted by memory ascending then NDCG@10
// descending. Exact duplicates are all kept.
std::vector<ParetoPoint> pareto_front(std::vector<ParetoPoint> points);

}  // namespace seqrec::harness
