#include "seqrec/losses/negatives.hpp"

#include <string>

#include "seqrec/errors.hpp"

namespace seqrec::losses {

NegativeSet sample_negatives(std::span<const Index> targets, std::size_t k,
                             std::size_t catalog_size, num::Rng& rng) {
  if (k == 0 || catalog_size < 2 || k > catalog_size - 1) {
    throw ParameterError("sample_negatives: k=" + std::to_string(k) +
                         " must lie in [1, C-1] for C=" + std::to_string(catalog_size));
  }
  NegativeSet set;
  set.positions = targets.size();
  set.k = k;
  set.items.assign(targets.size() * k, 0);
  for (std::size_t p = 0; p < targets.size(); ++p) {
    const Index target = targets[p];
    if (target == 0) continue;
    if (target < 0 || static_cast<std::size_t>(target) > catalog_size) {
      throw DataError("sample_negatives: target " + std::to_string(target) + " outside [1, C]");
    }
    for (std::size_t j = 0; j < k; ++j) {
      // Uniform over C-1 slots, shifted past the target.
      auto item = static_cast<Index>(rng.below(catalog_size - 1)) + 1;
      if (item >= target) ++item;
      set.items[p * k + j] = item;
    }
  }
  return set;
}

}  // namespace seqrec::losses
