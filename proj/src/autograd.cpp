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

#include "rescomp/autograd.hpp"

#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace rescomp {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <typename Real>
Var<Real>::Var(Tensor<Real> value, bool requires_grad)
    : node_(std::make_shared<Node<Real>>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

template <typename Real>
void Var<Real>::zero_grad() {
  if (node_ && !node_->grad.empty()) node_->grad.fill(Real(0));
}

template <typename Real>
Var<Real> make_op(const char* name, Tensor<Real> value,
                  std::vector<Var<Real>> inputs,
                  std::function<void(Node<Real>&)> backward) {
  auto node = std::make_shared<Node<Real>>();
  node->value = std::move(value);
  node->op = name;
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) {
      // Undefined optional inputs are recorded as constant placeholders so
      // that input indices stay stable for the backward closure.
      node->inputs.push_back(in.defined() ? in.node_ptr()
                                          : std::make_shared<Node<Real>>());
    }
    node->backward = std::move(backward);
  }
  return Var<Real>(std::move(node));
}

template <typename Real>
Graph<Real>::Graph(const Var<Real>& root) : root_(root) {
  if (!root.defined()) throw std::invalid_argument("graph root is undefined");
  // Iterative post-order DFS: a node is emitted after all of its inputs.
  std::unordered_set<Node<Real>*> visited;
  std::vector<std::pair<Node<Real>*, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  visited.insert(root.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Real>* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

template <typename Real>
void Graph<Real>::backward() {
  Node<Real>* root = root_.node();
  if (!root->value.shape().is_scalar()) {
    throw std::invalid_argument("backward requires a scalar loss, got " +
                                root->value.shape().to_string());
  }
  if (!root->requires_grad) return;
  root->grad_buffer()[0] += Real(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node<Real>* node = *it;
    if (node->is_leaf() || !node->backward || node->grad.empty()) continue;
    node->backward(*node);
    // Intermediate gradients are no longer needed once propagated.
    if (node != root) node->grad = Tensor<Real>();
  }
}

template class Var<float>;
template class Var<double>;
template class Graph<float>;
template class Graph<double>;
template Var<float> make_op(const char*, Tensor<float>, std::vector<Var<float>>,
                            std::function<void(Node<float>&)>);
template Var<double> make_op(const char*, Tensor<double>,
                             std::vector<Var<double>>,
                             std::function<void(Node<double>&)>);

}  // namespace rescomp
