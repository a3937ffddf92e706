#include "seqrec/harness/pareto.hpp"

#include <algorithm>
#include <limits>

namespace seqrec::harness {

bool dominates(const ParetoPoint& a, const ParetoPoint& b) noexcept {
  return a.peak_bytes <= b.peak_bytes && a.ndcg10 >= b.ndcg10 &&
         (a.peak_bytes < b.peak_bytes || a.ndcg10 > b.ndcg10);
}

std::vector<ParetoPoint> pareto_front(std::vector<ParetoPoint> points) {
  std::stable_sort(points.begin(), points.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.peak_bytes != b.peak_bytes) return a.peak_bytes < b.peak_bytes;
    return a.ndcg10 > b.ndcg10;
  });
  std::vector<ParetoPoint> front;
  double best_cheaper = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  while (i < points.size()) {
    // Within one memory level only the top NDCG survives; it also needs to
    // beat everything strictly cheaper.
    std::size_t j = i;
    const double top = points[i].ndcg10;
    while (j < points.size() && points[j].peak_bytes == points[i].peak_bytes) {
      if (points[j].ndcg10 == top && top > best_cheaper) front.push_back(points[j]);
      ++j;
    }
    best_cheaper = std::max(best_cheaper, top);
    i = j;
  }
  return front;
}

}  // namespace seqrec::harness
