/* Copyright 2026 The rescomp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Reverse-mode differentiation over a dynamically recorded graph.
//
// Every differentiable op produces a Node that keeps its inputs alive and a
// closure propagating the node's gradient into theirs. Parameters are leaf
// nodes with requires_grad set; their gradients accumulate across backward
// calls until zero_grad() is invoked.

#ifndef RESCOMP_AUTOGRAD_HPP_
#define RESCOMP_AUTOGRAD_HPP_

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "rescomp/tensor.hpp"

namespace rescomp {

template <typename Real>
struct Node {
  Tensor<Real> value;
  Tensor<Real> grad;  // empty until the first accumulation
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  bool is_leaf() const { return inputs.empty(); }

  // Gradient storage, zero-filled on first use.
  Tensor<Real>& grad_buffer() {
    if (grad.empty() && value.numel() > 0) grad = Tensor<Real>(value.shape());
    return grad;
  }
};

template <typename Real>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<Real> value, bool requires_grad = false);
  explicit Var(std::shared_ptr<Node<Real>> node) : node_(std::move(node)) {}

  static Var parameter(Tensor<Real> value) { return Var(std::move(value), true); }

  bool defined() const { return node_ != nullptr; }
  const Tensor<Real>& value() const { return node_->value; }
  Tensor<Real>& mutable_value() { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_->requires_grad; }

  bool has_grad() const { return !node_->grad.empty(); }
  const Tensor<Real>& grad() const { return node_->grad; }
  Tensor<Real>& mutable_grad() { return node_->grad_buffer(); }
  void zero_grad();

  Node<Real>* node() const { return node_.get(); }
  const std::shared_ptr<Node<Real>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<Real>> node_;
};

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// Records the output of an op. The result is a constant when recording is
// off or none of the inputs requires a gradient.
template <typename Real>
Var<Real> make_op(const char* name, Tensor<Real> value,
                  std::vector<Var<Real>> inputs,
                  std::function<void(Node<Real>&)> backward);

// Topologically ordered view of everything reachable from a root.
template <typename Real>
class Graph {
 public:
  explicit Graph(const Var<Real>& root);

  std::span<Node<Real>* const> nodes() const { return order_; }

  // Seeds the root with 1 and visits each node once in reverse order.
  // The root must be a scalar.
  void backward();

 private:
  Var<Real> root_;
  std::vector<Node<Real>*> order_;
};

template <typename Real>
void backward(const Var<Real>& loss) {
  Graph<Real>(loss).backward();
}

}  // namespace rescomp

#endif  // RESCOMP_AUTOGRAD_HPP_
