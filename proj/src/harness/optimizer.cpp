#include "seqrec/harness/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace seqrec::harness {

Adam::Adam(std::vector<num::Tensor> params, const OptimizerConfig& config)
    : params_(std::move(params)), config_(config) {
  for (auto& p : params_) {
    p.mutable_grad();
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const Real b1 = config_.beta1, b2 = config_.beta2;
  const Real c1 = 1.0 - std::pow(b1, static_cast<Real>(t_));
  const Real c2 = 1.0 - std::pow(b2, static_cast<Real>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i].mutable_data();
    auto g = params_[i].grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const Real update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config_.eps);
      w[j] -= config_.lr * (update + config_.weight_decay * w[j]);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    auto g = p.mutable_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
}

}  // namespace seqrec::harness
