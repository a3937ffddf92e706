#include "seqrec/numerics/tensor.hpp"

#include <algorithm>
#include <string>
#include <unordered_set>

#include "seqrec/errors.hpp"

namespace seqrec::num {
namespace {

thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::Node> new_leaf(Shape shape, Buffer values, bool requires_grad) {
  const auto n = shape_numel(shape);
  if (values.size() != n) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values for shape of " + std::to_string(n) + " elements");
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->numel = n;
  node->storage = std::make_shared<Buffer>(std::move(values));
  node->requires_grad = requires_grad;
  return node;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Real* detail::Node::grad_data() {
  if (grad.empty()) grad.assign(numel, 0.0);
  return grad.data();
}

Tensor::Tensor(Shape shape, Buffer values, bool requires_grad)
    : node_(new_leaf(std::move(shape), std::move(values), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  Buffer b(shape_numel(shape), 0.0);
  return Tensor(std::move(shape), std::move(b), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  Buffer b(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(b), requires_grad);
}

Tensor Tensor::from(Shape shape, const std::vector<Real>& values, bool requires_grad) {
  return Tensor(std::move(shape), Buffer(values.begin(), values.end()), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) {
  return Tensor(Shape{}, Buffer{value}, requires_grad);
}

Tensor Tensor::randn(Shape shape, Rng& rng, Real stddev, bool requires_grad) {
  Buffer b(shape_numel(shape));
  for (auto& v : b) v = stddev * rng.normal();
  return Tensor(std::move(shape), std::move(b), requires_grad);
}

std::size_t Tensor::rows() const noexcept {
  return node_->shape.empty() ? 1 : node_->shape[0];
}

std::size_t Tensor::cols() const noexcept {
  if (node_->shape.empty()) return 1;
  std::size_t n = 1;
  for (std::size_t i = 1; i < node_->shape.size(); ++i) n *= node_->shape[i];
  return n;
}

Real Tensor::item() const {
  if (numel() != 1) throw UsageError("item() on a tensor with " + std::to_string(numel()) + " elements");
  return node_->value()[0];
}

Tensor& Tensor::set_requires_grad(bool on) noexcept {
  node_->requires_grad = on;
  return *this;
}

Tensor& Tensor::retain_grad() noexcept {
  node_->retain_grad = true;
  return *this;
}

std::span<const Real> Tensor::grad() const {
  return {node_->grad_data(), node_->numel};
}

std::span<Real> Tensor::mutable_grad() {
  return {node_->grad_data(), node_->numel};
}

void Tensor::zero_grad() noexcept {
  Buffer().swap(node_->grad);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<detail::Node>();
  node->shape = node_->shape;
  node->numel = node_->numel;
  node->storage = node_->storage;
  node->offset = node_->offset;
  return Tensor::wrap(std::move(node));
}

Tensor Tensor::clone(bool requires_grad) const {
  auto d = data();
  return Tensor(shape(), Buffer(d.begin(), d.end()), requires_grad);
}

Tensor Tensor::wrap(std::shared_ptr<detail::Node> node) noexcept {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

bool grad_enabled() noexcept { return t_grad_enabled; }

NoGradGuard::NoGradGuard() noexcept : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

Tensor make_op(std::string_view name, Shape shape, Buffer value,
               std::vector<Tensor> parents,
               std::function<void(detail::Node& self)> backward_fn) {
  auto node = std::make_shared<detail::Node>();
  node->numel = shape_numel(shape);
  if (value.size() != node->numel) {
    throw DimensionError(std::string(name) + ": output buffer does not match shape");
  }
  node->shape = std::move(shape);
  node->storage = std::make_shared<Buffer>(std::move(value));
  node->op = name;
  const bool track = grad_enabled() &&
                     std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward_fn);
  }
  return Tensor::wrap(std::move(node));
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  if (x.rank() != 2 || begin > end || end > x.rows()) {
    throw DimensionError("slice_rows: invalid row range");
  }
  const std::size_t cols = x.cols();
  auto node = std::make_shared<detail::Node>();
  node->shape = {end - begin, cols};
  node->numel = (end - begin) * cols;
  node->storage = x.node()->storage;
  node->offset = x.node()->offset + begin * cols;
  node->op = "slice_rows";
  if (grad_enabled() && x.requires_grad()) {
    node->requires_grad = true;
    node->parents = {x.node()};
    node->backward = [begin, cols](detail::Node& self) {
      auto& parent = *self.parents[0];
      Real* g = parent.grad_data() + begin * cols;
      for (std::size_t i = 0; i < self.numel; ++i) g[i] += self.grad[i];
    };
  }
  return Tensor::wrap(std::move(node));
}

Tape Tape::record(const Tensor& root) {
  Tape tape;
  if (!root.requires_grad()) return tape;
  std::unordered_set<const detail::Node*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<std::shared_ptr<detail::Node>, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      const auto& parent = node->parents[next++];
      if (parent->requires_grad && seen.insert(parent.get()).second) {
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    tape.nodes_.push_back(node);
    stack.pop_back();
  }
  return tape;
}

void backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw UsageError("backward: root must be a scalar");
  }
  if (!loss.requires_grad()) return;
  Tape tape = Tape::record(loss);
  loss.node()->grad_data()[0] += 1.0;
  const auto& nodes = tape.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) {
    detail::Node& node = **it;
    if (node.backward && node.has_grad()) node.backward(node);
    if (!node.is_leaf()) {
      node.backward = nullptr;
      node.parents.clear();
      if (!node.retain_grad) Buffer().swap(node.grad);
    }
  }
}

}  // namespace seqrec::num
