#pragma once

// Test helpers: random instances and plain-loop reference computations that
// share no code with the library kernels.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/numerics/rng.hpp"
#include "seqrec/numerics/tensor.hpp"

namespace testing {

using seqrec::num::Index;
using seqrec::num::Real;
using seqrec::num::Rng;
using seqrec::num::Tensor;

inline Tensor random_matrix(std::size_t rows, std::size_t cols, Rng& rng, bool grad = true,
                            Real scale = 1.0) {
  std::vector<Real> v(rows * cols);
  for (auto& x : v) x = scale * rng.normal();
  return Tensor::from({rows, cols}, v, grad);
}

struct Instance {
  std::size_t n = 0, d = 0, catalog = 0;
  Tensor x, y;
  std::vector<Index> targets;
  std::vector<std::uint8_t> valid;
  std::size_t valid_count = 0;
};

// s x l outputs with a random left-padding pattern (at least one real row).
inline Instance random_instance(Rng& rng, std::size_t max_s = 4, std::size_t max_l = 8,
                                std::size_t max_c = 50, std::size_t max_d = 16,
                                std::size_t min_c = 2) {
  Instance in;
  const std::size_t s = 1 + rng.below(max_s);
  const std::size_t l = 1 + rng.below(max_l);
  in.catalog = min_c + rng.below(max_c - min_c + 1);
  in.d = 1 + rng.below(max_d);
  in.n = s * l;
  in.x = random_matrix(in.n, in.d, rng);
  in.y = random_matrix(in.catalog, in.d, rng);
  in.targets.assign(in.n, 0);
  in.valid.assign(in.n, 0);
  for (std::size_t u = 0; u < s; ++u) {
    const std::size_t pad = rng.below(l);
    for (std::size_t i = pad; i < l; ++i) {
      in.valid[u * l + i] = 1;
      in.targets[u * l + i] = static_cast<Index>(1 + rng.below(in.catalog));
    }
  }
  for (auto v : in.valid) in.valid_count += v;
  return in;
}

inline Real dot_rows(const Tensor& a, std::size_t i, const Tensor& b, std::size_t j) {
  Real s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a.at(i, c) * b.at(j, c);
  return s;
}

// -log softmax over an explicit list of logits at position `pos`, computed
// as log(sum exp) - l[pos] with a max shift.
inline Real neg_log_softmax(const std::vector<Real>& logits, std::size_t pos) {
  Real m = -INFINITY;
  for (Real v : logits) m = std::fmax(m, v);
  Real z = 0.0;
  for (Real v : logits) z += std::exp(v - m);
  return m + std::log(z) - logits[pos];
}

// Per-row full cross-entropy by direct summation.
inline Real ce_row(const Tensor& x, const Tensor& y, std::size_t row, Index target) {
  std::vector<Real> logits(y.rows());
  for (std::size_t c = 0; c < y.rows(); ++c) logits[c] = dot_rows(x, row, y, c);
  return neg_log_softmax(logits, static_cast<std::size_t>(target - 1));
}

inline Real max_abs_diff(std::span<const Real> a, std::span<const Real> b) {
  Real m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
  return m;
}

inline Real rel_diff(Real a, Real b) {
  const Real scale = std::fmax(std::fabs(a), std::fabs(b));
  return scale == 0.0 ? 0.0 : std::fabs(a - b) / scale;
}

}  // namespace testing
