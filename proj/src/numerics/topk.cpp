#include "seqrec/numerics/topk.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "seqrec/errors.hpp"

namespace seqrec::num {

std::vector<std::size_t> top_k(std::span<const Real> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw ParameterError("top_k: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(values.size()) + "]");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto before = [&values](std::size_t a, std::size_t b) {
    return values[a] > values[b] || (values[a] == values[b] && a < b);
  };
  const auto kth = idx.begin() + static_cast<std::ptrdiff_t>(k);
  if (k < idx.size()) std::nth_element(idx.begin(), kth - 1, idx.end(), before);
  idx.resize(k);
  std::sort(idx.begin(), idx.end(), before);
  return idx;
}

}  // namespace seqrec::num
