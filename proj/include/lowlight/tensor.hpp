// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lowlight/scalar.hpp"

namespace lowlight {

using Shape = std::vector<int>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<Scalar> data;
  std::vector<Scalar> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  Scalar* grad_buffer();
};

}  // namespace detail

/// Reference-counted handle to a node of a define-by-run autodiff graph.
///
/// Copies share the node. Operations build new nodes that keep their inputs
/// alive only when at least one input requires a gradient, so pure inference
/// does not retain a graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Scalar value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<Scalar> data, bool requires_grad = false);
  static Tensor scalar(Scalar value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  int dim(int axis) const;
  int ndim() const { return static_cast<int>(shape().size()); }
  std::size_t size() const;

  std::span<const Scalar> data() const;
  // Direct write access for initializers and optimizers.
  std::span<Scalar> mutable_data() const;
  std::span<const Scalar> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool flag) const;
  Scalar item() const;

  /// Reverse-mode sweep from a single-element tensor. Gradients accumulate
  /// into every reachable tensor that requires them.
  void backward() const;
  void zero_grad() const;
  /// Same values, no graph history, requires_grad = false.
  Tensor detach() const;
  Tensor clone(bool requires_grad = false) const;

  const detail::Node* node() const { return node_.get(); }

  static Tensor make(Shape shape, std::vector<Scalar> data, std::vector<Tensor> inputs,
                     std::function<void(detail::Node&)> backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// While alive, operations on the current thread record no graph, even when
/// their inputs require gradients. Used for sampling and evaluation.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

  static bool grad_enabled();

 private:
  bool previous_;
};

}  // namespace lowlight
