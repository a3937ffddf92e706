#include "seqrec/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "seqrec/errors.hpp"

namespace seqrec::num {

Tensor finite_diff_grad(const std::function<Real(const Tensor&)>& f, const Tensor& x, Real step) {
  NoGradGuard no_grad;
  Tensor probe = x.clone();
  auto values = probe.mutable_data();
  Buffer grad(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Real original = values[i];
    values[i] = original + step;
    const Real up = f(probe);
    values[i] = original - step;
    const Real down = f(probe);
    values[i] = original;
    grad[i] = (up - down) / (2.0 * step);
  }
  return Tensor(x.shape(), std::move(grad));
}

Real relative_error(std::span<const Real> a, std::span<const Real> b) {
  if (a.size() != b.size()) throw DimensionError("relative_error: size mismatch");
  Real diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const Real denom = std::sqrt(std::max(na, nb));
  return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

}  // namespace seqrec::num
