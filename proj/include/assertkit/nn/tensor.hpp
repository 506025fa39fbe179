// include/assertkit/nn/tensor.hpp

// Copyright 2025  assertkit authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASSERTKIT_NN_TENSOR_HPP_
#define ASSERTKIT_NN_TENSOR_HPP_

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "assertkit/common.hpp"

namespace assertkit::nn {

// Reverse-mode tape.  Every forward primitive appends one node; the creation
// counter (seq) is the topological order, so backward() is a single sweep
// over reachable nodes in decreasing seq.  A tape and its tensors belong to
// one worker at a time.
template <typename T>
struct Node {
  std::vector<std::size_t> shape;
  std::vector<T> value;
  std::vector<T> grad;  // allocated lazily, same size as value
  bool requires_grad = false;
  bool backward_done = false;  // set on the node backward() was seeded from
  std::uint64_t seq = 0;
  std::vector<std::shared_ptr<Node<T>>> inputs;
  std::function<void(Node<T>&)> backprop;  // accumulates into inputs' grads

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

inline std::uint64_t next_seq() {
  static std::atomic<std::uint64_t> counter{0};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t d : shape) n *= d;
  return n;
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr<T> node) : node_(std::move(node)) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    return full(std::move(shape), T(0), requires_grad);
  }

  static Tensor full(std::vector<std::size_t> shape, T v, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value.assign(shape_numel(shape), v);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad;
    n->seq = next_seq();
    return Tensor(std::move(n));
  }

  static Tensor from_values(std::vector<std::size_t> shape, std::vector<T> values,
                            bool requires_grad = false) {
    check(shape_numel(shape) == values.size(), "tensor: shape/value size mismatch");
    auto n = std::make_shared<Node<T>>();
    n->shape = std::move(shape);
    n->value = std::move(values);
    n->requires_grad = requires_grad;
    n->seq = next_seq();
    return Tensor(std::move(n));
  }

  bool defined() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t ndim() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape[i]; }
  std::size_t numel() const { return node_->value.size(); }

  std::vector<T>& values() { return node_->value; }
  const std::vector<T>& values() const { return node_->value; }
  T* data() { return node_->value.data(); }
  const T* data() const { return node_->value.data(); }

  T item() const {
    check(numel() == 1, "tensor: item() on non-scalar");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }

  const std::vector<T>& grad() const {
    check(node_->grad.size() == node_->value.size(), "tensor: gradient not populated");
    return node_->grad;
  }

  void zero_grad() {
    node_->grad.assign(node_->value.size(), T(0));
    node_->backward_done = false;
  }

  NodePtr<T> node() const { return node_; }

 private:
  NodePtr<T> node_;
};

template <typename T>
Tensor<T> make_op(std::vector<std::size_t> shape, std::vector<T> value,
                  std::vector<NodePtr<T>> inputs,
                  std::function<void(Node<T>&)> backprop) {
  auto n = std::make_shared<Node<T>>();
  check(shape_numel(shape) == value.size(), "op: shape/value size mismatch");
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->seq = next_seq();
  for (const NodePtr<T>& in : inputs)
    if (in->requires_grad) n->requires_grad = true;
  if (n->requires_grad) {
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
  }
  return Tensor<T>(std::move(n));
}

// Reverse sweep from a scalar loss.  Populates grad on every reachable tensor
// with requires_grad.  Calling twice on the same loss without zero_grad() on
// it is an error, as is a loss detached from all parameters.
template <typename T>
void backward(const Tensor<T>& loss) {
  check(loss.defined(), "backward: undefined loss");
  check(loss.numel() == 1, "backward: loss must be a scalar");
  NodePtr<T> root = loss.node();
  check(root->requires_grad, "backward: graph is detached (no input requires grad)");
  check(!root->backward_done, "backward: already ran for this graph; zero_grad first");
  root->backward_done = true;

  // Collect reachable nodes; seq order is a valid topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<Node<T>*> stack = {root.get()};
  seen.insert(root.get());
  while (!stack.empty()) {
    Node<T>* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (const NodePtr<T>& in : n->inputs)
      if (in->requires_grad && seen.insert(in.get()).second) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const Node<T>* a, const Node<T>* b) { return a->seq > b->seq; });

  for (Node<T>* n : order) n->ensure_grad();
  root->grad[0] += T(1);
  for (Node<T>* n : order)
    if (n->backprop) n->backprop(*n);
}

}  // namespace assertkit::nn

#endif  // ASSERTKIT_NN_TENSOR_HPP_
