#include "seqrec/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/eigen.hpp"

namespace seqrec::num {
namespace {

using detail::Node;

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a rank-2 tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw DimensionError(std::string(op) + ": shape mismatch");
}

Buffer copy_values(const Tensor& t) {
  auto d = t.data();
  return Buffer(d.begin(), d.end());
}

// Accumulates g into the parent's gradient if it participates in the graph.
template <class F>
void with_parent_grad(Node& self, std::size_t i, F&& f) {
  Node& parent = *self.parents[i];
  if (parent.requires_grad) f(parent.grad_data(), parent);
}

}  // namespace

Real dot(const Real* a, const Real* b, std::size_t n) noexcept {
  Real s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions " + std::to_string(k) + " and " +
                         std::to_string(b.rows()) + " disagree");
  }
  Buffer out(m * n);
  as_matrix(out.data(), m, n).noalias() =
      as_matrix(a.data().data(), m, k) * as_matrix(b.data().data(), k, n);
  return make_op("matmul", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const Real* av = self.parents[0]->value();
    const Real* bv = self.parents[1]->value();
    auto g = as_matrix(self.grad.data(), m, n);
    with_parent_grad(self, 0, [&](Real* ga, Node&) {
      as_matrix(ga, m, k).noalias() += g * as_matrix(bv, k, n).transpose();
    });
    with_parent_grad(self, 1, [&](Real* gb, Node&) {
      as_matrix(gb, k, n).noalias() += as_matrix(av, m, k).transpose() * g;
    });
  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) throw DimensionError("matmul_nt: inner dimensions disagree");
  Buffer out(m * n);
  as_matrix(out.data(), m, n).noalias() =
      as_matrix(a.data().data(), m, k) * as_matrix(b.data().data(), n, k).transpose();
  return make_op("matmul_nt", {m, n}, std::move(out), {a, b}, [m, k, n](Node& self) {
    const Real* av = self.parents[0]->value();
    const Real* bv = self.parents[1]->value();
    auto g = as_matrix(self.grad.data(), m, n);
    with_parent_grad(self, 0, [&](Real* ga, Node&) {
      as_matrix(ga, m, k).noalias() += g * as_matrix(bv, n, k);
    });
    with_parent_grad(self, 1, [&](Real* gb, Node&) {
      as_matrix(gb, n, k).noalias() += g.transpose() * as_matrix(av, m, k);
    });
  });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  Buffer out(m * n);
  as_matrix(out.data(), n, m) = as_matrix(a.data().data(), m, n).transpose();
  return make_op("transpose", {n, m}, std::move(out), {a}, [m, n](Node& self) {
    with_parent_grad(self, 0, [&](Real* ga, Node&) {
      as_matrix(ga, m, n) += as_matrix(self.grad.data(), n, m).transpose();
    });
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Buffer out = copy_values(a);
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return make_op("add", a.shape(), std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      with_parent_grad(self, p, [&](Real* g, Node&) {
        for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i];
      });
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Buffer out = copy_values(a);
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return make_op("sub", a.shape(), std::move(out), {a, b}, [](Node& self) {
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i];
    });
    with_parent_grad(self, 1, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] -= self.grad[i];
    });
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  Buffer out = copy_values(a);
  auto bv = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return make_op("mul", a.shape(), std::move(out), {a, b}, [](Node& self) {
    const Real* av = self.parents[0]->value();
    const Real* bv2 = self.parents[1]->value();
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i] * bv2[i];
    });
    with_parent_grad(self, 1, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i] * av[i];
    });
  });
}

Tensor scale(const Tensor& x, Real factor) {
  Buffer out = copy_values(x);
  for (auto& v : out) v *= factor;
  return make_op("scale", x.shape(), std::move(out), {x}, [factor](Node& self) {
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += factor * self.grad[i];
    });
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  require_matrix(x, "add_bias");
  const std::size_t n = x.rows(), d = x.cols();
  if (bias.numel() != d) throw DimensionError("add_bias: bias length must equal column count");
  Buffer out = copy_values(x);
  auto bv = bias.data();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) out[r * d + c] += bv[c];
  return make_op("add_bias", x.shape(), std::move(out), {x, bias}, [n, d](Node& self) {
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i];
    });
    with_parent_grad(self, 1, [&](Real* g, Node&) {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) g[c] += self.grad[r * d + c];
    });
  });
}

Tensor sum(const Tensor& x) {
  Real s = 0.0;
  for (auto v : x.data()) s += v;
  return make_op("sum", {}, Buffer{s}, {x}, [](Node& self) {
    with_parent_grad(self, 0, [&](Real* g, Node& parent) {
      for (std::size_t i = 0; i < parent.numel; ++i) g[i] += self.grad[0];
    });
  });
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw EmptyBatchError("mean: empty tensor");
  return scale(sum(x), 1.0 / static_cast<Real>(x.numel()));
}

Tensor relu(const Tensor& x) {
  Buffer out = copy_values(x);
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  return make_op("relu", x.shape(), std::move(out), {x}, [](Node& self) {
    const Real* y = self.value();
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i)
        if (y[i] > 0.0) g[i] += self.grad[i];
    });
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  require_matrix(x, "layer_norm");
  const std::size_t n = x.rows(), d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: affine parameters must have one entry per column");
  }
  auto xv = x.data();
  auto gv = gamma.data();
  auto bv = beta.data();
  Buffer normalized(n * d);
  Buffer rstd(n);
  Buffer out(n * d);
  for (std::size_t r = 0; r < n; ++r) {
    const Real* row = xv.data() + r * d;
    Real mu = 0.0;
    for (std::size_t c = 0; c < d; ++c) mu += row[c];
    mu /= static_cast<Real>(d);
    Real var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<Real>(d);
    const Real inv = 1.0 / std::sqrt(var + eps);
    rstd[r] = inv;
    for (std::size_t c = 0; c < d; ++c) {
      const Real xh = (row[c] - mu) * inv;
      normalized[r * d + c] = xh;
      out[r * d + c] = xh * gv[c] + bv[c];
    }
  }
  return make_op(
      "layer_norm", x.shape(), std::move(out), {x, gamma, beta},
      [n, d, xhat = std::move(normalized), rstd = std::move(rstd)](Node& self) {
        const Real* gv2 = self.parents[1]->value();
        const Real* g = self.grad.data();
        with_parent_grad(self, 1, [&](Real* dg, Node&) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) dg[c] += g[r * d + c] * xhat[r * d + c];
        });
        with_parent_grad(self, 2, [&](Real* db, Node&) {
          for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < d; ++c) db[c] += g[r * d + c];
        });
        with_parent_grad(self, 0, [&](Real* dx, Node&) {
          const Real inv_d = 1.0 / static_cast<Real>(d);
          for (std::size_t r = 0; r < n; ++r) {
            Real mean_dxh = 0.0, mean_dxh_xh = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
              const Real dxh = g[r * d + c] * gv2[c];
              mean_dxh += dxh;
              mean_dxh_xh += dxh * xhat[r * d + c];
            }
            mean_dxh *= inv_d;
            mean_dxh_xh *= inv_d;
            for (std::size_t c = 0; c < d; ++c) {
              const Real dxh = g[r * d + c] * gv2[c];
              dx[r * d + c] += rstd[r] * (dxh - mean_dxh - xhat[r * d + c] * mean_dxh_xh);
            }
          }
        });
      });
}

Tensor gather_rows(const Tensor& table, std::span<const Index> indices) {
  require_matrix(table, "gather_rows");
  const std::size_t rows = table.rows(), d = table.cols();
  std::vector<Index> idx(indices.begin(), indices.end());
  Buffer out(idx.size() * d);
  auto tv = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= rows) {
      throw DataError("gather_rows: index " + std::to_string(idx[i]) + " out of range");
    }
    std::copy_n(tv.data() + idx[i] * d, d, out.data() + i * d);
  }
  const std::size_t count = idx.size();
  return make_op("gather_rows", {count, d}, std::move(out), {table},
                 [d, idx = std::move(idx)](Node& self) {
                   with_parent_grad(self, 0, [&](Real* g, Node&) {
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       Real* dst = g + idx[i] * d;
                       const Real* src = self.grad.data() + i * d;
                       for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                     }
                   });
                 });
}

Tensor embedding(const Tensor& table, std::span<const Index> ids, Index pad_index) {
  require_matrix(table, "embedding");
  const std::size_t rows = table.rows(), d = table.cols();
  std::vector<Index> idx(ids.begin(), ids.end());
  Buffer out(idx.size() * d, 0.0);
  auto tv = table.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= rows) {
      throw DataError("embedding: item index " + std::to_string(idx[i]) + " outside [0, " +
                      std::to_string(rows - 1) + "]");
    }
    if (idx[i] == pad_index) continue;
    std::copy_n(tv.data() + idx[i] * d, d, out.data() + i * d);
  }
  const std::size_t count = idx.size();
  return make_op("embedding", {count, d}, std::move(out), {table},
                 [d, pad_index, idx = std::move(idx)](Node& self) {
                   with_parent_grad(self, 0, [&](Real* g, Node&) {
                     for (std::size_t i = 0; i < idx.size(); ++i) {
                       if (idx[i] == pad_index) continue;
                       Real* dst = g + idx[i] * d;
                       const Real* src = self.grad.data() + i * d;
                       for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
                     }
                   });
                 });
}

Tensor scatter_rows(const Tensor& x, std::span<const Index> positions, std::size_t total_rows) {
  require_matrix(x, "scatter_rows");
  const std::size_t d = x.cols();
  if (positions.size() != x.rows()) throw DimensionError("scatter_rows: one position per row");
  std::vector<Index> pos(positions.begin(), positions.end());
  Buffer out(total_rows * d, 0.0);
  auto xv = x.data();
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (pos[i] < 0 || static_cast<std::size_t>(pos[i]) >= total_rows) {
      throw DataError("scatter_rows: position out of range");
    }
    std::copy_n(xv.data() + i * d, d, out.data() + pos[i] * d);
  }
  return make_op("scatter_rows", {total_rows, d}, std::move(out), {x},
                 [d, pos = std::move(pos)](Node& self) {
                   with_parent_grad(self, 0, [&](Real* g, Node&) {
                     for (std::size_t i = 0; i < pos.size(); ++i) {
                       const Real* src = self.grad.data() + pos[i] * d;
                       for (std::size_t c = 0; c < d; ++c) g[i * d + c] += src[c];
                     }
                   });
                 });
}

Tensor mask_rows(const Tensor& x, std::span<const std::uint8_t> keep) {
  require_matrix(x, "mask_rows");
  const std::size_t n = x.rows(), d = x.cols();
  if (keep.size() != n) throw DimensionError("mask_rows: one mask entry per row");
  std::vector<std::uint8_t> mask(keep.begin(), keep.end());
  Buffer out = copy_values(x);
  for (std::size_t r = 0; r < n; ++r)
    if (!mask[r]) std::fill_n(out.data() + r * d, d, 0.0);
  return make_op("mask_rows", x.shape(), std::move(out), {x},
                 [n, d, mask = std::move(mask)](Node& self) {
                   with_parent_grad(self, 0, [&](Real* g, Node&) {
                     for (std::size_t r = 0; r < n; ++r) {
                       if (!mask[r]) continue;
                       for (std::size_t c = 0; c < d; ++c) g[r * d + c] += self.grad[r * d + c];
                     }
                   });
                 });
}

Tensor dropout(const Tensor& x, Real p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ParameterError("dropout: rate must be below 1");
  const Real keep_scale = 1.0 / (1.0 - p);
  Buffer mask(x.numel());
  for (auto& m : mask) m = rng.uniform() < p ? 0.0 : keep_scale;
  Buffer out = copy_values(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= mask[i];
  return make_op("dropout", x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i] * mask[i];
    });
  });
}

Real logsumexp(std::span<const Real> v) {
  if (v.empty()) throw EmptySupportError("logsumexp: empty input");
  const Real m = *std::max_element(v.begin(), v.end());
  if (m == kNegInf) throw EmptySupportError("logsumexp: every entry is -inf");
  Real s = 0.0;
  for (auto x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<Real> softmax(std::span<const Real> v) {
  const Real lse = logsumexp(v);
  std::vector<Real> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
  return out;
}

Tensor logsumexp(const Tensor& v) {
  const Real lse = logsumexp(v.data());
  return make_op("logsumexp", {}, Buffer{lse}, {v}, [lse](Node& self) {
    const Real* x = self.parents[0]->value();
    with_parent_grad(self, 0, [&](Real* g, Node& parent) {
      for (std::size_t i = 0; i < parent.numel; ++i) g[i] += self.grad[0] * std::exp(x[i] - lse);
    });
  });
}

Tensor softmax_rows(const Tensor& x) {
  const std::size_t n = x.rank() == 2 ? x.rows() : 1;
  const std::size_t d = x.rank() == 2 ? x.cols() : x.numel();
  Buffer out(x.numel());
  auto xv = x.data();
  for (std::size_t r = 0; r < n; ++r) {
    auto p = softmax(xv.subspan(r * d, d));
    std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  return make_op("softmax_rows", x.shape(), std::move(out), {x}, [n, d](Node& self) {
    const Real* y = self.value();
    with_parent_grad(self, 0, [&](Real* g, Node&) {
      for (std::size_t r = 0; r < n; ++r) {
        const Real* yr = y + r * d;
        const Real* gr = self.grad.data() + r * d;
        const Real inner = dot(yr, gr, d);
        for (std::size_t c = 0; c < d; ++c) g[r * d + c] += yr[c] * (gr[c] - inner);
      }
    });
  });
}

}  // namespace seqrec::num
