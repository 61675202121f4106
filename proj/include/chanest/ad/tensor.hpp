// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The chanest Authors.

#ifndef CHANEST_AD_TENSOR_HPP_
#define CHANEST_AD_TENSOR_HPP_

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace chanest::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until the backward pass touches the node
  bool requires_grad = false;
  bool consumed = false;     // tape already replayed once
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad();
};

}  // namespace detail

// Dense row-major real tensor with a handle to its reverse-mode tape node.
//
// Tensors are cheap shared handles: copying a Tensor aliases the same
// storage. Operations in ops.hpp build a fresh graph on every forward call;
// backward() replays it exactly once.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  /// Scalar value of a one-element tensor.
  double item() const;

  bool requires_grad() const;
  /// Gradient buffer; all zeros if no backward pass has reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Deep copy without graph history.
  Tensor detach_copy() const;

  // Internal: used by ops to wire the tape.
  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a scalar tensor. Gradients of leaf
/// tensors accumulate; intermediates are released. Throws std::logic_error
/// when the graph behind `loss` has already been replayed.
void backward(const Tensor& loss);

/// Whether ops currently record a tape (thread-local).
bool grad_mode_enabled();

/// Disables tape recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace chanest::ad

#endif  // CHANEST_AD_TENSOR_HPP_
