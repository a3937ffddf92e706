#pragma once

#include <cstddef>
#include <vector>

#include "seqrec/harness/config.hpp"

namespace seqrec::harness {

// Adam with bias correction; weight decay is decoupled (applied to the
// weights, not mixed into the moments).
class Adam {
 public:
  Adam(std::vector<num::Tensor> params, const OptimizerConfig& config);

  // Applies one update from the accumulated gradients.
  void step();
  // Zeroes gradients in place, keeping the buffers allocated.
  void zero_grad();

  std::size_t steps() const noexcept { return t_; }

 private:
  std::vector<num::Tensor> params_;
  OptimizerConfig config_;
  std::vector<num::Buffer> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace seqrec::harness
