// SPDX-License-Identifier: Apache-2.0
#include "lowlight/tensor.hpp"

#include <algorithm>
#include <unordered_set>

#include "lowlight/errors.hpp"

namespace lowlight {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeError("negative extent in shape " + to_string(shape));
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Scalar* detail::Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Scalar(0));
  return grad.data();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), Scalar(0), requires_grad); }

Tensor Tensor::full(Shape shape, Scalar value, bool requires_grad) {
  const std::size_t n = numel(shape);
  return from_data(std::move(shape), std::vector<Scalar>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<Scalar> data, bool requires_grad) {
  if (numel(shape) != data.size())
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " + to_string(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(Scalar value, bool requires_grad) { return from_data({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

int Tensor::dim(int axis) const {
  const int nd = ndim();
  if (axis < 0) axis += nd;
  if (axis < 0 || axis >= nd) throw RangeError("axis out of range for shape " + to_string(shape()));
  return node_->shape[static_cast<std::size_t>(axis)];
}

std::size_t Tensor::size() const { return node_->data.size(); }
std::span<const Scalar> Tensor::data() const { return node_->data; }
std::span<Scalar> Tensor::mutable_data() const { return node_->data; }
std::span<const Scalar> Tensor::grad() const { return node_->grad; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool flag) const { node_->requires_grad = flag; }

Scalar Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

void Tensor::zero_grad() const { node_->grad.clear(); }

Tensor Tensor::detach() const { return from_data(shape(), node_->data, false); }

Tensor Tensor::clone(bool requires_grad) const { return from_data(shape(), node_->data, requires_grad); }

namespace {
thread_local bool grad_enabled_flag = true;
}

NoGradGuard::NoGradGuard() : previous_(grad_enabled_flag) { grad_enabled_flag = false; }
NoGradGuard::~NoGradGuard() { grad_enabled_flag = previous_; }
bool NoGradGuard::grad_enabled() { return grad_enabled_flag; }

Tensor Tensor::make(Shape shape, std::vector<Scalar> data, std::vector<Tensor> inputs,
                    std::function<void(detail::Node&)> backward) {
  Tensor out = from_data(std::move(shape), std::move(data), false);
  const bool any = NoGradGuard::grad_enabled() &&
                   std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    out.node_->requires_grad = true;
    out.node_->backward = std::move(backward);
    out.node_->parents.reserve(inputs.size());
    for (auto& t : inputs) out.node_->parents.push_back(t.node_);
  }
  return out;
}

void Tensor::backward() const {
  if (size() != 1) throw ShapeError("backward() needs a single-element tensor, got " + to_string(shape()));
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += Scalar(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace lowlight
