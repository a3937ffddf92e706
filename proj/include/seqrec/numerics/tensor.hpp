#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a cheap handle to a node in the computation graph. Ops that
// receive at least one input with requires_grad (while grad mode is on)
// record their parents and a backward closure; backward() orders the
// reachable nodes topologically and runs the closures in reverse.
//
// The graph is consumed by backward(): intermediate gradients and saved
// buffers are released as soon as they have been propagated. Gradients are
// kept for leaves and for nodes marked with retain_grad().

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "seqrec/numerics/memory.hpp"
#include "seqrec/numerics/rng.hpp"

namespace seqrec::num {

using Shape = std::vector<std::size_t>;
using Index = std::int64_t;

std::size_t shape_numel(const Shape& shape) noexcept;

namespace detail {

struct Node {
  Shape shape;
  std::size_t numel = 0;
  std::shared_ptr<Buffer> storage;
  std::size_t offset = 0;
  Buffer grad;
  bool requires_grad = false;
  bool retain_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  std::string_view op = "leaf";

  Real* value() noexcept { return storage->data() + offset; }
  const Real* value() const noexcept { return storage->data() + offset; }
  // Allocates a zero gradient on first use.
  Real* grad_data();
  bool has_grad() const noexcept { return !grad.empty(); }
  bool is_leaf() const noexcept { return op == "leaf"; }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Buffer values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor from(Shape shape, const std::vector<Real>& values, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);
  static Tensor randn(Shape shape, Rng& rng, Real stddev = 1.0, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const noexcept { return node_->shape; }
  std::size_t rank() const noexcept { return node_->shape.size(); }
  // Leading dimension (1 for scalars) and the product of the rest.
  std::size_t rows() const noexcept;
  std::size_t cols() const noexcept;
  std::size_t numel() const noexcept { return node_->numel; }

  std::span<const Real> data() const noexcept { return {node_->value(), node_->numel}; }
  // In-place write access. Aliased by every view of the same storage.
  std::span<Real> mutable_data() noexcept { return {node_->value(), node_->numel}; }
  Real item() const;
  Real at(std::size_t row, std::size_t col) const noexcept {
    return node_->value()[row * cols() + col];
  }

  bool requires_grad() const noexcept { return node_->requires_grad; }
  Tensor& set_requires_grad(bool on) noexcept;
  Tensor& retain_grad() noexcept;
  bool has_grad() const noexcept { return node_->has_grad(); }
  // Accumulated gradient; allocated as zeros when nothing flowed here.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad() noexcept;

  // Leaf sharing this tensor's storage, outside any graph.
  Tensor detach() const;
  // Leaf with its own copy of the values.
  Tensor clone(bool requires_grad = false) const;

  const void* storage_id() const noexcept { return node_->storage.get(); }
  std::string_view op_name() const noexcept { return node_->op; }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }
  static Tensor wrap(std::shared_ptr<detail::Node> node) noexcept;

 private:
  std::shared_ptr<detail::Node> node_;
};

bool grad_enabled() noexcept;

// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard() noexcept;
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Creates the output of a differentiable op. When grad mode is off or no
// parent requires grad, parents and the closure are dropped.
Tensor make_op(std::string_view name, Shape shape, Buffer value,
               std::vector<Tensor> parents,
               std::function<void(detail::Node& self)> backward);

// View over rows [begin, end) of a rank-2 tensor. Shares storage with the
// source; gradients flow back into the corresponding source rows.
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Topologically ordered record of the graph reachable from a root.
class Tape {
 public:
  static Tape record(const Tensor& root);

  std::size_t size() const noexcept { return nodes_.size(); }
  // Parents precede children.
  const std::vector<std::shared_ptr<detail::Node>>& nodes() const noexcept { return nodes_; }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

// Reverse-mode pass from a scalar root. Throws UsageError for non-scalars.
void backward(const Tensor& loss);

}  // namespace seqrec::num
