#include "seqrec/sce/sce_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/eigen.hpp"
#include "seqrec/numerics/ops.hpp"

namespace seqrec::sce {
namespace {

using num::Buffer;
using num::as_matrix;
using num::detail::Node;

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();
constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();

std::size_t checked_valid_count(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                                std::span<const std::uint8_t> valid) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw DimensionError("sce_loss: X [n x d] and Y [C x d] must share d");
  }
  if (targets.size() != x.rows() || valid.size() != x.rows()) {
    throw DimensionError("sce_loss: targets and mask need one entry per output row");
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (!valid[r]) continue;
    if (targets[r] < 1 || static_cast<std::size_t>(targets[r]) > y.rows()) {
      throw DataError("sce_loss: target " + std::to_string(targets[r]) + " outside [1, C]");
    }
    ++count;
  }
  if (count == 0) throw EmptyBatchError("sce_loss: every position is padded");
  return count;
}

// Copies the listed rows (row = index + offset) of a [rows x d] matrix.
Buffer gather(const Real* src, std::span<const Index> rows, Index offset, std::size_t d) {
  Buffer out(rows.size() * d);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(src + (rows[i] + offset) * d, d, out.data() + i * d);
  return out;
}

}  // namespace

void SceConfig::validate() const {
  if (n_buckets == 0 || bucket_x == 0 || bucket_y == 0) {
    throw ParameterError("SceConfig: n_buckets, bucket_x and bucket_y must be >= 1");
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ParameterError("SceConfig: alpha and beta must be > 0");
}

SceOutput sce_loss_with_assignment(const Tensor& x, const Tensor& y,
                                   std::span<const Index> targets,
                                   std::span<const std::uint8_t> valid,
                                   const BucketAssignment& assignment) {
  const std::size_t valid_count = checked_valid_count(x, y, targets, valid);
  const std::size_t n = x.rows(), d = x.cols(), catalog = y.rows();
  const std::size_t nb = assignment.n_buckets, bx = assignment.bucket_x, by = assignment.bucket_y;
  if (nb == 0 || assignment.outputs.size() != nb * bx || assignment.items.size() != nb * by) {
    throw DimensionError("sce_loss: malformed bucket assignment");
  }
  for (auto o : assignment.outputs) {
    if (o < 0 || static_cast<std::size_t>(o) >= n || !valid[o]) {
      throw ParameterError("sce_loss: bucket references a padded or missing output row");
    }
  }
  for (auto j : assignment.items) {
    if (j < 1 || static_cast<std::size_t>(j) > catalog) {
      throw ParameterError("sce_loss: bucket references an item outside [1, C]");
    }
  }

  const Real* xv = x.data().data();
  const Real* yv = y.data().data();

  // The only buffer that scales with bucket_y.
  Buffer logits(nb * bx * by);
  Buffer positives(nb * bx);
  Buffer lse(nb * bx);

  std::vector<Index> winner(n, -1);
  std::vector<Real> best(n, kNaN);
  std::vector<std::uint32_t> placements(n, 0);
  std::size_t correct_hits = 0;

  for (std::size_t b = 0; b < nb; ++b) {
    auto outs = assignment.outputs_of(b);
    auto items = assignment.items_of(b);
    Buffer bucket_x_rows = gather(xv, outs, 0, d);
    Buffer bucket_y_rows = gather(yv, items, -1, d);
    Real* block = logits.data() + b * bx * by;
    as_matrix(block, bx, by).noalias() =
        as_matrix(bucket_x_rows.data(), bx, d) * as_matrix(bucket_y_rows.data(), by, d).transpose();
    for (std::size_t i = 0; i < bx; ++i) {
      const auto out = static_cast<std::size_t>(outs[i]);
      const Index target = targets[out];
      Real* row = block + i * by;
      for (std::size_t j = 0; j < by; ++j) {
        if (items[j] == target) {
          row[j] = kNegInf;
          ++correct_hits;
        }
      }
      const std::size_t slot = b * bx + i;
      const Real pos = num::dot(xv + out * d, yv + (target - 1) * d, d);
      positives[slot] = pos;
      Real m = pos;
      for (std::size_t j = 0; j < by; ++j) m = std::max(m, row[j]);
      Real z = std::exp(pos - m);
      for (std::size_t j = 0; j < by; ++j) z += std::exp(row[j] - m);
      lse[slot] = m + std::log(z);
      const Real loss = lse[slot] - pos;
      ++placements[out];
      if (winner[out] < 0 || loss > best[out]) {
        winner[out] = static_cast<Index>(slot);
        best[out] = loss;
      }
    }
  }

  std::size_t covered = 0, unique = 0;
  Real total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (winner[r] < 0) continue;
    ++covered;
    if (placements[r] == 1) ++unique;
    total += best[r];
  }
  if (covered == 0) throw ParameterError("sce_loss: no output was placed in any bucket");

  SceOutput result;
  result.covered_positions = covered;
  result.unique_selection_fraction = static_cast<Real>(unique) / static_cast<Real>(valid_count);
  result.correct_logit_fraction =
      static_cast<Real>(correct_hits) / static_cast<Real>(nb * bx);
  result.per_position = best;
  result.assignment = assignment;

  const Real value = total / static_cast<Real>(covered);
  result.value = num::make_op(
      "sce_loss", {}, Buffer{value}, {x, y},
      [d, nb, bx, by, covered, assignment, logits = std::move(logits),
       positives = std::move(positives), lse = std::move(lse), winner = std::move(winner),
       tg = std::vector<Index>(targets.begin(), targets.end())](Node& self) mutable {
        const Real w = self.grad[0] / static_cast<Real>(covered);
        const Real* xv2 = self.parents[0]->value();
        const Real* yv2 = self.parents[1]->value();
        Real* dx = self.parents[0]->requires_grad ? self.parents[0]->grad_data() : nullptr;
        Real* dy = self.parents[1]->requires_grad ? self.parents[1]->grad_data() : nullptr;
        for (std::size_t b = 0; b < nb; ++b) {
          auto outs = assignment.outputs_of(b);
          auto items = assignment.items_of(b);
          Real* block = logits.data() + b * bx * by;
          bool any = false;
          // Only the winning placement of each output carries gradient.
          for (std::size_t i = 0; i < bx; ++i) {
            const std::size_t slot = b * bx + i;
            Real* row = block + i * by;
            if (winner[outs[i]] != static_cast<Index>(slot)) {
              std::fill_n(row, by, 0.0);
              continue;
            }
            any = true;
            for (std::size_t j = 0; j < by; ++j) row[j] = w * std::exp(row[j] - lse[slot]);
            const Real dpos = w * (std::exp(positives[slot] - lse[slot]) - 1.0);
            const auto out = static_cast<std::size_t>(outs[i]);
            const auto trow = static_cast<std::size_t>(tg[out] - 1);
            if (dx) {
              for (std::size_t c = 0; c < d; ++c) dx[out * d + c] += dpos * yv2[trow * d + c];
            }
            if (dy) {
              for (std::size_t c = 0; c < d; ++c) dy[trow * d + c] += dpos * xv2[out * d + c];
            }
          }
          if (!any) continue;
          auto g = as_matrix(block, bx, by);
          if (dx) {
            Buffer rows_y = gather(yv2, items, -1, d);
            Buffer grad_x(bx * d);
            as_matrix(grad_x.data(), bx, d).noalias() = g * as_matrix(rows_y.data(), by, d);
            for (std::size_t i = 0; i < bx; ++i)
              for (std::size_t c = 0; c < d; ++c) dx[outs[i] * d + c] += grad_x[i * d + c];
          }
          if (dy) {
            Buffer rows_x = gather(xv2, outs, 0, d);
            Buffer grad_y(by * d);
            as_matrix(grad_y.data(), by, d).noalias() = g.transpose() * as_matrix(rows_x.data(), bx, d);
            for (std::size_t j = 0; j < by; ++j)
              for (std::size_t c = 0; c < d; ++c) dy[(items[j] - 1) * d + c] += grad_y[j * d + c];
          }
        }
        Buffer().swap(logits);
      });
  return result;
}

SceOutput sce_loss(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                   const SceConfig& config, std::span<const std::uint8_t> valid, num::Rng& rng,
                   SizePolicy policy) {
  config.validate();
  const std::size_t valid_count = checked_valid_count(x, y, targets, valid);
  std::size_t bx = config.bucket_x, by = config.bucket_y;
  if (policy == SizePolicy::kClamp) {
    bx = std::min(bx, valid_count);
    by = std::min(by, y.rows());
  }

  // Selection runs without gradient tracking; the projections stay alive
  // until the bucket logits have been formed.
  Projections proj;
  BucketAssignment assignment;
  {
    num::NoGradGuard no_grad;
    Tensor centers;
    if (!config.use_mix) {
      centers = generate_bucket_centers(config.n_buckets, x.cols(), rng);
    } else if (config.mix_catalog) {
      centers = mix_catalog_centers(y, config.n_buckets, rng);
    } else {
      centers = mix_bucket_centers(x, config.n_buckets, rng, valid);
    }
    proj = project(centers, x, y, valid);
    assignment = assign_from_projections(proj, config.n_buckets, x.rows(), y.rows(), bx, by,
                                         valid_count);
  }
  return sce_loss_with_assignment(x, y, targets, valid, assignment);
}

}  // namespace seqrec::sce
