#include "seqrec/losses/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/eigen.hpp"
#include "seqrec/numerics/ops.hpp"

namespace seqrec::losses {
namespace {

using num::Buffer;
using num::as_matrix;
using num::detail::Node;

constexpr Real kNaN = std::numeric_limits<Real>::quiet_NaN();

struct RowRun {
  std::size_t begin;
  std::size_t end;
};

void check_xy(const Tensor& x, const Tensor& y, const char* op) {
  if (x.rank() != 2 || y.rank() != 2 || x.cols() != y.cols()) {
    throw DimensionError(std::string(op) + ": X [n x d] and Y [C x d] must share d");
  }
}

// Validates targets at valid positions and returns how many there are.
std::size_t count_valid(std::span<const Index> targets, std::span<const std::uint8_t> valid,
                        std::size_t rows, std::size_t catalog, const char* op) {
  if (targets.size() != rows || valid.size() != rows) {
    throw DimensionError(std::string(op) + ": targets and mask need one entry per row");
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!valid[r]) continue;
    if (targets[r] < 1 || static_cast<std::size_t>(targets[r]) > catalog) {
      throw DataError(std::string(op) + ": target " + std::to_string(targets[r]) +
                      " outside [1, " + std::to_string(catalog) + "]");
    }
    ++count;
  }
  if (count == 0) throw EmptyBatchError(std::string(op) + ": every position is padded");
  return count;
}

// Maximal runs of consecutive valid rows.
std::vector<RowRun> valid_runs(std::span<const std::uint8_t> valid) {
  std::vector<RowRun> runs;
  std::size_t r = 0;
  while (r < valid.size()) {
    if (!valid[r]) {
      ++r;
      continue;
    }
    std::size_t e = r;
    while (e < valid.size() && valid[e]) ++e;
    runs.push_back({r, e});
    r = e;
  }
  return runs;
}

Real* grad_or_null(Node& parent) { return parent.requires_grad ? parent.grad_data() : nullptr; }

enum class SampledKind { kBce, kCeMinus };

LossOutput sampled_loss(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                        const NegativeSet& negatives, std::span<const std::uint8_t> valid,
                        SampledKind kind, const char* op) {
  check_xy(x, y, op);
  const std::size_t n = x.rows(), d = x.cols(), catalog = y.rows();
  const std::size_t count = count_valid(targets, valid, n, catalog, op);
  const std::size_t k = negatives.k;
  if (k == 0 || negatives.positions != n) {
    throw DimensionError(std::string(op) + ": negative set must have one row per position");
  }
  const std::size_t width = k + 1;
  // Column 0 holds the positive item, columns 1..k the negatives.
  std::vector<Index> items(n * width, 0);
  for (std::size_t r = 0; r < n; ++r) {
    if (!valid[r]) continue;
    items[r * width] = targets[r];
    for (std::size_t j = 0; j < k; ++j) {
      const Index neg = negatives.at(r, j);
      if (neg == targets[r]) {
        throw ParameterError(std::string(op) + ": negative equals the positive item at position " +
                             std::to_string(r));
      }
      if (neg < 1 || static_cast<std::size_t>(neg) > catalog) {
        throw DataError(std::string(op) + ": negative item outside [1, C]");
      }
      items[r * width + 1 + j] = neg;
    }
  }

  const Real* xv = x.data().data();
  const Real* yv = y.data().data();
  Buffer logits(n * width, 0.0);
  std::vector<Real> per_position(n, kNaN);
  Real total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!valid[r]) continue;
    Real* row = logits.data() + r * width;
    for (std::size_t j = 0; j < width; ++j) {
      row[j] = num::dot(xv + r * d, yv + (items[r * width + j] - 1) * d, d);
    }
    Real loss = 0.0;
    if (kind == SampledKind::kBce) {
      loss = softplus(-row[0]);
      for (std::size_t j = 1; j < width; ++j) loss += softplus(row[j]);
    } else {
      loss = num::logsumexp(std::span<const Real>(row, width)) - row[0];
    }
    per_position[r] = loss;
    total += loss;
  }

  const Real value = total / static_cast<Real>(count);
  Tensor out = num::make_op(
      op, {}, Buffer{value}, {x, y},
      [n, d, width, count, kind, logits = std::move(logits), items = std::move(items),
       mask = std::vector<std::uint8_t>(valid.begin(), valid.end())](Node& self) mutable {
        const Real w = self.grad[0] / static_cast<Real>(count);
        const Real* xv2 = self.parents[0]->value();
        const Real* yv2 = self.parents[1]->value();
        Real* dx = grad_or_null(*self.parents[0]);
        Real* dy = grad_or_null(*self.parents[1]);
        for (std::size_t r = 0; r < n; ++r) {
          if (!mask[r]) continue;
          Real* row = logits.data() + r * width;
          if (kind == SampledKind::kBce) {
            row[0] = -w * sigmoid(-row[0]);
            for (std::size_t j = 1; j < width; ++j) row[j] = w * sigmoid(row[j]);
          } else {
            const Real lse = num::logsumexp(std::span<const Real>(row, width));
            for (std::size_t j = 0; j < width; ++j) row[j] = w * std::exp(row[j] - lse);
            row[0] -= w;
          }
          for (std::size_t j = 0; j < width; ++j) {
            const std::size_t item_row = static_cast<std::size_t>(items[r * width + j] - 1);
            if (dx) {
              const Real* yr = yv2 + item_row * d;
              for (std::size_t c = 0; c < d; ++c) dx[r * d + c] += row[j] * yr[c];
            }
            if (dy) {
              const Real* xr = xv2 + r * d;
              for (std::size_t c = 0; c < d; ++c) dy[item_row * d + c] += row[j] * xr[c];
            }
          }
        }
      });
  return {std::move(out), count, std::move(per_position)};
}

}  // namespace

Real softplus(Real z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

Real sigmoid(Real z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const Real e = std::exp(z);
  return e / (1.0 + e);
}

LossOutput full_ce(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                   std::span<const std::uint8_t> valid) {
  check_xy(x, y, "full_ce");
  const std::size_t n = x.rows(), d = x.cols(), catalog = y.rows();
  const std::size_t count = count_valid(targets, valid, n, catalog, "full_ce");
  auto runs = valid_runs(valid);

  const Real* xv = x.data().data();
  const Real* yv = y.data().data();
  Buffer logits(n * catalog, 0.0);
  for (const auto& run : runs) {
    const std::size_t m = run.end - run.begin;
    as_matrix(logits.data() + run.begin * catalog, m, catalog).noalias() =
        as_matrix(xv + run.begin * d, m, d) * as_matrix(yv, catalog, d).transpose();
  }
  Buffer lse(n, 0.0);
  std::vector<Real> per_position(n, kNaN);
  Real total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!valid[r]) continue;
    const Real* row = logits.data() + r * catalog;
    lse[r] = num::logsumexp(std::span<const Real>(row, catalog));
    per_position[r] = lse[r] - row[targets[r] - 1];
    total += per_position[r];
  }

  const Real value = total / static_cast<Real>(count);
  Tensor out = num::make_op(
      "full_ce", {}, Buffer{value}, {x, y},
      [n, d, catalog, count, runs = std::move(runs), logits = std::move(logits),
       lse = std::move(lse), tg = std::vector<Index>(targets.begin(), targets.end()),
       mask = std::vector<std::uint8_t>(valid.begin(), valid.end())](Node& self) mutable {
        const Real w = self.grad[0] / static_cast<Real>(count);
        // Logits become dL/dlogits in place: w * (softmax - one_hot).
        for (std::size_t r = 0; r < n; ++r) {
          if (!mask[r]) continue;
          Real* row = logits.data() + r * catalog;
          for (std::size_t c = 0; c < catalog; ++c) row[c] = w * std::exp(row[c] - lse[r]);
          row[tg[r] - 1] -= w;
        }
        const Real* xv2 = self.parents[0]->value();
        const Real* yv2 = self.parents[1]->value();
        Real* dx = grad_or_null(*self.parents[0]);
        Real* dy = grad_or_null(*self.parents[1]);
        for (const auto& run : runs) {
          const std::size_t m = run.end - run.begin;
          auto g = as_matrix(logits.data() + run.begin * catalog, m, catalog);
          if (dx) {
            as_matrix(dx + run.begin * d, m, d).noalias() += g * as_matrix(yv2, catalog, d);
          }
          if (dy) {
            as_matrix(dy, catalog, d).noalias() += g.transpose() * as_matrix(xv2 + run.begin * d, m, d);
          }
        }
        Buffer().swap(logits);
      });
  return {std::move(out), count, std::move(per_position)};
}

LossOutput ce_from_logits(const Tensor& logits, std::span<const Index> targets,
                          std::span<const std::uint8_t> valid) {
  if (logits.rank() != 2) throw DimensionError("ce_from_logits: logits must be [n x C]");
  const std::size_t n = logits.rows(), catalog = logits.cols();
  const std::size_t count = count_valid(targets, valid, n, catalog, "ce_from_logits");
  const Real* lv = logits.data().data();
  Buffer lse(n, 0.0);
  std::vector<Real> per_position(n, kNaN);
  Real total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (!valid[r]) continue;
    lse[r] = num::logsumexp(std::span<const Real>(lv + r * catalog, catalog));
    per_position[r] = lse[r] - lv[r * catalog + targets[r] - 1];
    total += per_position[r];
  }
  const Real value = total / static_cast<Real>(count);
  Tensor out = num::make_op(
      "ce_from_logits", {}, Buffer{value}, {logits},
      [n, catalog, count, lse = std::move(lse),
       tg = std::vector<Index>(targets.begin(), targets.end()),
       mask = std::vector<std::uint8_t>(valid.begin(), valid.end())](Node& self) {
        Node& parent = *self.parents[0];
        if (!parent.requires_grad) return;
        const Real w = self.grad[0] / static_cast<Real>(count);
        const Real* lv2 = parent.value();
        Real* g = parent.grad_data();
        for (std::size_t r = 0; r < n; ++r) {
          if (!mask[r]) continue;
          for (std::size_t c = 0; c < catalog; ++c)
            g[r * catalog + c] += w * std::exp(lv2[r * catalog + c] - lse[r]);
          g[r * catalog + tg[r] - 1] -= w;
        }
      });
  return {std::move(out), count, std::move(per_position)};
}

LossOutput bce(const Tensor& x, const Tensor& y, std::span<const Index> targets,
               const NegativeSet& negatives, std::span<const std::uint8_t> valid) {
  if (negatives.k != 1) throw ParameterError("bce: exactly one negative per position");
  return sampled_loss(x, y, targets, negatives, valid, SampledKind::kBce, "bce");
}

LossOutput bce_plus(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                    const NegativeSet& negatives, std::span<const std::uint8_t> valid) {
  return sampled_loss(x, y, targets, negatives, valid, SampledKind::kBce, "bce_plus");
}

LossOutput ce_minus(const Tensor& x, const Tensor& y, std::span<const Index> targets,
                    const NegativeSet& negatives, std::span<const std::uint8_t> valid) {
  return sampled_loss(x, y, targets, negatives, valid, SampledKind::kCeMinus, "ce_minus");
}

}  // namespace seqrec::losses
