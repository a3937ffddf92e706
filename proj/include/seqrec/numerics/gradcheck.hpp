#pragma once

#include <functional>
#include <span>

#include "seqrec/numerics/tensor.hpp"

namespace seqrec::num {

// Central-difference gradient of a scalar function:
//   (f(x + h e_i) - f(x - h e_i)) / 2h   for every coordinate i.
// f is evaluated on perturbed copies of x; x itself is not modified.
Tensor finite_diff_grad(const std::function<Real(const Tensor&)>& f, const Tensor& x, Real step);

// ||a - b||_2 / max(||a||_2, ||b||_2); zero when both are zero.
Real relative_error(std::span<const Real> a, std::span<const Real> b);

}  // namespace seqrec::num
