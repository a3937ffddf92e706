#include "seqrec/numerics/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/ops.hpp"

namespace seqrec::num {

Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                        std::span<const Segment> segments, std::size_t n_heads) {
  if (q.rank() != 2 || q.shape() != k.shape() || q.shape() != v.shape()) {
    throw DimensionError("causal_attention: q, k, v must share one [n x d] shape");
  }
  const std::size_t n = q.rows(), d = q.cols();
  if (n_heads == 0 || d % n_heads != 0) {
    throw DimensionError("causal_attention: width not divisible by head count");
  }
  const std::size_t dh = d / n_heads;
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(dh));

  std::vector<Segment> segs(segments.begin(), segments.end());
  std::vector<std::size_t> prob_offset(segs.size());
  std::size_t total = 0;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    if (segs[s].begin + segs[s].length > n) throw DimensionError("causal_attention: segment out of range");
    prob_offset[s] = total;
    total += n_heads * segs[s].length * segs[s].length;
  }

  const Real* qv = q.data().data();
  const Real* kv = k.data().data();
  const Real* vv = v.data().data();
  Buffer probs(total, 0.0);
  Buffer out(n * d, 0.0);
  std::vector<Real> scores;
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const std::size_t base = segs[s].begin, len = segs[s].length;
    for (std::size_t h = 0; h < n_heads; ++h) {
      Real* p = probs.data() + prob_offset[s] + h * len * len;
      const std::size_t col = h * dh;
      for (std::size_t i = 0; i < len; ++i) {
        const Real* qi = qv + (base + i) * d + col;
        scores.resize(i + 1);
        Real m = -std::numeric_limits<Real>::infinity();
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = scale * dot(qi, kv + (base + j) * d + col, dh);
          m = std::max(m, scores[j]);
        }
        Real z = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
          scores[j] = std::exp(scores[j] - m);
          z += scores[j];
        }
        Real* oi = out.data() + (base + i) * d + col;
        for (std::size_t j = 0; j <= i; ++j) {
          const Real pij = scores[j] / z;
          p[i * len + j] = pij;
          const Real* vj = vv + (base + j) * d + col;
          for (std::size_t c = 0; c < dh; ++c) oi[c] += pij * vj[c];
        }
      }
    }
  }

  return make_op(
      "causal_attention", {n, d}, std::move(out), {q, k, v},
      [d, dh, n_heads, scale, segs = std::move(segs), prob_offset = std::move(prob_offset),
       probs = std::move(probs)](detail::Node& self) {
        const Real* qv2 = self.parents[0]->value();
        const Real* kv2 = self.parents[1]->value();
        const Real* vv2 = self.parents[2]->value();
        Real* dq = self.parents[0]->requires_grad ? self.parents[0]->grad_data() : nullptr;
        Real* dk = self.parents[1]->requires_grad ? self.parents[1]->grad_data() : nullptr;
        Real* dv = self.parents[2]->requires_grad ? self.parents[2]->grad_data() : nullptr;
        const Real* g = self.grad.data();
        std::vector<Real> dscore;
        for (std::size_t s = 0; s < segs.size(); ++s) {
          const std::size_t base = segs[s].begin, len = segs[s].length;
          for (std::size_t h = 0; h < n_heads; ++h) {
            const Real* p = probs.data() + prob_offset[s] + h * len * len;
            const std::size_t col = h * dh;
            for (std::size_t i = 0; i < len; ++i) {
              const Real* gi = g + (base + i) * d + col;
              dscore.resize(i + 1);
              Real weighted = 0.0;
              for (std::size_t j = 0; j <= i; ++j) {
                const Real pij = p[i * len + j];
                dscore[j] = dot(gi, vv2 + (base + j) * d + col, dh);
                weighted += pij * dscore[j];
                if (dv) {
                  Real* dvj = dv + (base + j) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dvj[c] += pij * gi[c];
                }
              }
              const Real* qi = qv2 + (base + i) * d + col;
              for (std::size_t j = 0; j <= i; ++j) {
                const Real ds = scale * p[i * len + j] * (dscore[j] - weighted);
                if (ds == 0.0) continue;
                if (dq) {
                  Real* dqi = dq + (base + i) * d + col;
                  const Real* kj = kv2 + (base + j) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
                }
                if (dk) {
                  Real* dkj = dk + (base + j) * d + col;
                  for (std::size_t c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
                }
              }
            }
          }
        }
      });
}

}  // namespace seqrec::num
