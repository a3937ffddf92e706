#pragma once

// Differentiable ops used by the backbone and the losses. Rank-2 tensors are
// (rows x cols) row-major matrices; vectors are rank 1.

#include <cstdint>
#include <span>
#include <vector>

#include "seqrec/numerics/tensor.hpp"

namespace seqrec::num {

// a[m x k] * b[k x n].
Tensor matmul(const Tensor& a, const Tensor& b);
// a[m x k] * b[n x k]^T.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);
// x[n x d] + bias[d] broadcast over rows.
Tensor add_bias(const Tensor& x, const Tensor& bias);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = 1e-8);

// out[i] = table[indices[i]].
Tensor gather_rows(const Tensor& table, std::span<const Index> indices);
// Like gather_rows, but rows equal to pad_index read as zero and never
// receive gradient. Indices outside [0, rows) raise DataError.
Tensor embedding(const Tensor& table, std::span<const Index> ids, Index pad_index);
// Inverse layout of gather_rows: out has total_rows rows, row positions[i]
// = x[i], every other row zero. Positions must be distinct.
Tensor scatter_rows(const Tensor& x, std::span<const Index> positions, std::size_t total_rows);
// Zeros rows whose mask entry is 0.
Tensor mask_rows(const Tensor& x, std::span<const std::uint8_t> keep);
// Inverted dropout. Identity when !training or p == 0.
Tensor dropout(const Tensor& x, Real p, Rng& rng, bool training);

// log sum exp over every element; -inf entries contribute nothing.
Tensor logsumexp(const Tensor& v);
// Row-wise softmax of a rank-2 tensor (rank 1 treated as one row).
Tensor softmax_rows(const Tensor& x);

// Plain numeric kernels, no graph.
// Throws EmptySupportError when every entry is -inf.
Real logsumexp(std::span<const Real> v);
std::vector<Real> softmax(std::span<const Real> v);
Real dot(const Real* a, const Real* b, std::size_t n) noexcept;

}  // namespace seqrec::num
