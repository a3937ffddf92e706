#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "seqrec/errors.hpp"
#include "seqrec/numerics/attention.hpp"
#include "seqrec/numerics/gradcheck.hpp"
#include "seqrec/numerics/memory.hpp"
#include "seqrec/numerics/ops.hpp"
#include "seqrec/numerics/topk.hpp"
#include "support.hpp"

using namespace seqrec;
using namespace seqrec::num;
using testing::random_matrix;

namespace {

// Checks d/dx of sum(op(x) * w) for a fixed random w against central
// differences.
Real op_grad_error(const std::function<Tensor(const Tensor&)>& op, const Tensor& x_in,
                   std::uint64_t seed) {
  Rng rng(seed, 99);
  Tensor x = x_in.clone(true);
  Tensor probe_out;
  {
    NoGradGuard g;
    probe_out = op(x);
  }
  std::vector<Real> w(probe_out.numel());
  for (auto& v : w) v = rng.normal();
  Tensor wt = Tensor::from(probe_out.shape(), w);
  backward(sum(mul(op(x), wt)));
  auto f = [&](const Tensor& xp) { return sum(mul(op(xp), wt)).item(); };
  Tensor fd = finite_diff_grad(f, x, 1e-6);
  return relative_error(x.grad(), fd.data());
}

}  // namespace

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(7, 1), b(7, 1), c(7, 2), d(8, 1);
  bool differs_stream = false, differs_seed = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    differs_stream |= va != c.next_u64();
    differs_seed |= va != d.next_u64();
  }
  CHECK(differs_stream);
  CHECK(differs_seed);
  CHECK(a.draws() == 100);
  Rng f = Rng(7, 0).fork(1);
  CHECK(f.next_u64() == Rng(7, 1).next_u64());
}

TEST_CASE("rng uniform, normal and below have the right moments") {
  Rng rng(3, 0);
  const int n = 200000;
  double sum = 0, sq = 0, usum = 0;
  std::vector<int> bins(7, 0);
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    usum += u;
    ++bins[rng.below(7)];
  }
  CHECK(std::fabs(sum / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::fabs(sq / n - 1.0) < 0.02);
  CHECK(std::fabs(usum / n - 0.5) < 0.005);
  // Binomial(n, 1/7): 5 sigma band.
  const double p = 1.0 / 7, sigma = std::sqrt(n * p * (1 - p));
  for (int b : bins) CHECK(std::fabs(b - n * p) < 5 * sigma);
}

TEST_CASE("top_k matches a full sort with ties broken by index") {
  Rng rng(11, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    std::vector<Real> v(n);
    // Few distinct values so ties are common.
    for (auto& x : v) x = static_cast<Real>(rng.below(5));
    const std::size_t k = 1 + rng.below(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] > v[b]; });
    order.resize(k);
    CHECK(top_k(v, k) == order);
  }
  std::vector<Real> v{1, 2, 3};
  CHECK_THROWS_AS(top_k(v, 0), ParameterError);
  CHECK_THROWS_AS(top_k(v, 4), ParameterError);
  std::vector<Real> with_inf{-INFINITY, 2.0, -INFINITY, 1.0};
  CHECK(top_k(with_inf, 2) == std::vector<std::size_t>{1, 3});
}

TEST_CASE("tensor construction and misuse errors") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  auto m = Tensor::from({2, 2}, {1, 2, 3, 4});
  CHECK(m.rows() == 2);
  CHECK(m.cols() == 2);
  CHECK(m.at(1, 0) == 3.0);
  CHECK_THROWS_AS(m.item(), UsageError);
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), UsageError);
  CHECK(Tensor::scalar(2.5).item() == 2.5);
}

TEST_CASE("detach shares storage, clone copies") {
  auto x = Tensor::from({2}, {1, 2}, true);
  auto d = x.detach();
  auto c = x.clone();
  CHECK(d.storage_id() == x.storage_id());
  CHECK(c.storage_id() != x.storage_id());
  d.mutable_data()[0] = 9;
  CHECK(x.data()[0] == 9);
  CHECK(c.data()[0] == 1);
  CHECK_FALSE(d.requires_grad());
}

TEST_CASE("slice_rows is a view and routes gradients to the source rows") {
  auto t = Tensor::from({4, 2}, {0, 0, 1, 2, 3, 4, 5, 6}, true);
  auto v = slice_rows(t, 1, 4);
  CHECK(v.rows() == 3);
  CHECK(v.at(0, 1) == 2.0);
  backward(sum(v));
  auto g = t.grad();
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 0.0);
  for (std::size_t i = 2; i < 8; ++i) CHECK(g[i] == 1.0);
  t.mutable_data()[2] = 42.0;
  CHECK(v.at(0, 0) == 42.0);
  CHECK_THROWS(slice_rows(t, 3, 5));
}

TEST_CASE("no graph is recorded under NoGradGuard or without grad inputs") {
  auto x = Tensor::from({2}, {1, 2}, true);
  {
    NoGradGuard g;
    CHECK_FALSE(grad_enabled());
    auto y = scale(x, 3.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
  }
  CHECK(grad_enabled());
  auto c = Tensor::from({2}, {1, 2});
  CHECK_FALSE(scale(c, 2.0).requires_grad());
  CHECK(scale(x, 2.0).requires_grad());
}

TEST_CASE("backward releases intermediates and accumulates into leaves") {
  auto x = Tensor::from({3}, {1, -2, 3}, true);
  auto h = mul(x, x);
  auto kept = scale(h, 1.0);
  kept.retain_grad();
  auto loss = sum(kept);
  auto tape = Tape::record(loss);
  CHECK(tape.size() == 4);
  CHECK(tape.nodes().front()->is_leaf());
  backward(loss);
  CHECK(x.grad()[1] == doctest::Approx(-4.0));
  CHECK_FALSE(h.has_grad());
  CHECK(kept.has_grad());
  CHECK(h.node()->parents.empty());
  // A second pass over a fresh graph accumulates.
  backward(sum(mul(x, x)));
  CHECK(x.grad()[1] == doctest::Approx(-8.0));
  x.zero_grad();
  CHECK_FALSE(x.has_grad());
}

TEST_CASE("op gradients match central differences") {
  Rng rng(21, 0);
  auto a = random_matrix(3, 4, rng, false);
  auto b = random_matrix(4, 5, rng, false);
  auto b_nt = random_matrix(5, 4, rng, false);
  auto same = random_matrix(3, 4, rng, false);
  auto bias = random_matrix(1, 4, rng, false);
  bias = Tensor::from({4}, std::vector<Real>(bias.data().begin(), bias.data().end()));
  auto gamma = Tensor::from({4}, {1.0, 0.5, -1.2, 2.0});
  auto beta = Tensor::from({4}, {0.1, 0.0, -0.3, 0.2});
  const Real tol = 1e-6;

  CHECK(op_grad_error([&](const Tensor& x) { return matmul(x, b); }, a, 1) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return matmul(a, x); }, b, 2) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return matmul_nt(x, b_nt); }, a, 3) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return matmul_nt(a, x); }, b_nt, 4) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return transpose(x); }, a, 5) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return add(x, same); }, a, 6) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return sub(same, x); }, a, 7) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return mul(x, same); }, a, 8) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return mul(x, x); }, a, 9) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return scale(x, -1.7); }, a, 10) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return add_bias(x, bias); }, a, 11) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return add_bias(a, x); }, bias, 12) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return mean(x); }, a, 13) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return relu(x); }, a, 14) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return layer_norm(x, gamma, beta); }, a, 15) < 1e-5);
  CHECK(op_grad_error([&](const Tensor& g) { return layer_norm(a, g, beta); }, gamma, 16) < tol);
  CHECK(op_grad_error([&](const Tensor& bb) { return layer_norm(a, gamma, bb); }, beta, 17) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return softmax_rows(x); }, a, 18) < tol);
  CHECK(op_grad_error([&](const Tensor& x) { return logsumexp(x); }, a, 19) < tol);

  std::vector<Index> idx{2, 0, 2, 1};
  CHECK(op_grad_error([&](const Tensor& x) { return gather_rows(x, idx); }, a, 20) < tol);
  std::vector<Index> ids{0, 1, 0, 2};
  CHECK(op_grad_error([&](const Tensor& x) { return embedding(x, ids, 0); }, a, 21) < tol);
  std::vector<Index> pos{4, 0, 2};
  CHECK(op_grad_error([&](const Tensor& x) { return scatter_rows(x, pos, 6); }, a, 22) < tol);
  std::vector<std::uint8_t> keep{1, 0, 1};
  CHECK(op_grad_error([&](const Tensor& x) { return mask_rows(x, keep); }, a, 23) < tol);
}

TEST_CASE("embedding: padding rows read zero, get no gradient, bad ids raise") {
  auto table = Tensor::from({3, 2}, {7, 7, 1, 2, 3, 4}, true);
  std::vector<Index> ids{0, 2, 0, 1};
  auto e = embedding(table, ids, 0);
  CHECK(e.at(0, 0) == 0.0);
  CHECK(e.at(1, 1) == 4.0);
  backward(sum(e));
  CHECK(table.grad()[0] == 0.0);
  CHECK(table.grad()[1] == 0.0);
  CHECK(table.grad()[2] == 1.0);
  std::vector<Index> bad{3};
  CHECK_THROWS_AS(embedding(table, bad, 0), DataError);
  std::vector<Index> neg{-1};
  CHECK_THROWS_AS(embedding(table, neg, 0), DataError);
}

TEST_CASE("dropout: identity in eval mode, inverted scaling in training") {
  Rng rng(5, 0);
  auto x = Tensor::full({1000, 4}, 1.0, true);
  auto eval_out = dropout(x, 0.5, rng, false);
  CHECK(eval_out.storage_id() == x.storage_id());
  auto out = dropout(x, 0.25, rng, true);
  std::size_t zeros = 0;
  for (Real v : out.data()) {
    CHECK((v == 0.0 || std::fabs(v - 1.0 / 0.75) < 1e-15));
    zeros += v == 0.0;
  }
  CHECK(std::fabs(zeros / 4000.0 - 0.25) < 0.03);
  backward(sum(out));
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == out.data()[i]);
}

TEST_CASE("plain logsumexp and softmax") {
  std::vector<Real> v{1000.0, 1000.0};
  CHECK(logsumexp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  std::vector<Real> with_inf{-INFINITY, 0.0, -INFINITY};
  CHECK(logsumexp(with_inf) == 0.0);
  std::vector<Real> all_inf{-INFINITY, -INFINITY};
  CHECK_THROWS_AS(logsumexp(all_inf), EmptySupportError);
  std::vector<Real> empty;
  CHECK_THROWS_AS(logsumexp(empty), EmptySupportError);
  auto p = softmax(std::vector<Real>{0.0, std::log(3.0)});
  CHECK(p[0] == doctest::Approx(0.25));
  CHECK(p[1] == doctest::Approx(0.75));
}

TEST_CASE("causal attention against a direct per-row oracle") {
  Rng rng(8, 0);
  const std::size_t n = 7, d = 4, heads = 2, dh = 2;
  auto q = random_matrix(n, d, rng, false);
  auto k = random_matrix(n, d, rng, false);
  auto v = random_matrix(n, d, rng, false);
  std::vector<Segment> segs{{0, 3}, {4, 3}};
  auto out = causal_attention(q, k, v, segs, heads);
  // Row 3 belongs to no segment.
  for (std::size_t c = 0; c < d; ++c) CHECK(out.at(3, c) == 0.0);
  for (const auto& seg : segs) {
    for (std::size_t i = 0; i < seg.length; ++i) {
      const std::size_t r = seg.begin + i;
      for (std::size_t h = 0; h < heads; ++h) {
        std::vector<Real> scores;
        for (std::size_t j = 0; j <= i; ++j) {
          Real s = 0;
          for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) s += q.at(r, c) * k.at(seg.begin + j, c);
          scores.push_back(s / std::sqrt(Real(dh)));
        }
        auto p = softmax(scores);
        for (std::size_t c = h * dh; c < (h + 1) * dh; ++c) {
          Real expect = 0;
          for (std::size_t j = 0; j <= i; ++j) expect += p[j] * v.at(seg.begin + j, c);
          CHECK(out.at(r, c) == doctest::Approx(expect).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("causal attention gradients and causality") {
  Rng rng(9, 0);
  const std::size_t n = 6, d = 4;
  auto q = random_matrix(n, d, rng, false);
  auto k = random_matrix(n, d, rng, false);
  auto v = random_matrix(n, d, rng, false);
  std::vector<Segment> segs{{0, 4}, {4, 2}};
  CHECK(op_grad_error([&](const Tensor& x) { return causal_attention(x, k, v, segs, 2); }, q, 1) < 1e-6);
  CHECK(op_grad_error([&](const Tensor& x) { return causal_attention(q, x, v, segs, 2); }, k, 2) < 1e-6);
  CHECK(op_grad_error([&](const Tensor& x) { return causal_attention(q, k, x, segs, 2); }, v, 3) < 1e-6);
  CHECK(op_grad_error([&](const Tensor& x) { return causal_attention(x, x, x, segs, 1); }, q, 4) < 1e-6);

  auto base = causal_attention(q, k, v, segs, 2);
  auto k2 = k.clone();
  auto v2 = v.clone();
  for (std::size_t c = 0; c < d; ++c) {
    k2.mutable_data()[2 * d + c] += 1.0;
    v2.mutable_data()[2 * d + c] -= 2.0;
  }
  auto moved = causal_attention(q, k2, v2, segs, 2);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      if (r < 2 || r >= 4) CHECK(moved.at(r, c) == base.at(r, c));
    }
  }
  CHECK_THROWS(causal_attention(q, k, v, segs, 3));
}

TEST_CASE("counting allocator tracks live and peak elements") {
  const auto live = MemoryCounter::live_elements();
  MemoryProbe probe;
  {
    Buffer a(1000);
    CHECK(MemoryCounter::live_elements() == live + 1000);
    { Buffer b(500); }
    Buffer c(200);
    CHECK(probe.peak_elements() == 1500);
  }
  CHECK(MemoryCounter::live_elements() == live);
  CHECK(probe.peak_bytes() == 1500 * static_cast<std::int64_t>(kAccountingBytesPerElement));
}

TEST_CASE("finite differences and relative error helpers") {
  auto x = Tensor::from({3}, {1.0, 2.0, -1.0});
  auto g = finite_diff_grad([](const Tensor& t) {
    Real s = 0;
    for (Real v : t.data()) s += v * v * v;
    return s;
  }, x, 1e-5);
  CHECK(g.data()[1] == doctest::Approx(12.0).epsilon(1e-8));
  CHECK(x.data()[1] == 2.0);
  std::vector<Real> a{3, 4}, b{3, 4}, z{0, 0};
  CHECK(relative_error(a, b) == 0.0);
  CHECK(relative_error(z, z) == 0.0);
  CHECK(relative_error(a, z) == doctest::Approx(1.0));
}
