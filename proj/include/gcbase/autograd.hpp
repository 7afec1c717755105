// Copyright 2026 The gcbase Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal reverse-mode automatic differentiation over dense tensors.
//
// Every differentiable op produces a Node holding its value and a closure that
// propagates the node's gradient into its parents. Graphs are built per
// forward call and released when the last Var referencing them goes away.

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gcbase/tensor.hpp"

namespace gcbase::ad {

namespace detail {
inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : prev_(detail::grad_enabled_flag()) { detail::grad_enabled_flag() = false; }
  ~NoGradGuard() { detail::grad_enabled_flag() = prev_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> n) : node_(std::move(n)) {}

  /// Constant or trainable leaf.
  static Var leaf(Tensor<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && grad_enabled();
    return Var(std::move(n));
  }

  bool defined() const noexcept { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool requires_grad() const noexcept { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  Node<T>* node() const noexcept { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const noexcept { return node_; }

  /// Scalar convenience accessor.
  T item() const {
    if (node_->value.size() != 1) throw ShapeError("item() on non-scalar " + shape_str(shape()));
    return node_->value[0];
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Creates the output node of an op. The backward closure receives the output
/// node; parents are reachable through `node.parents` in the order given.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> inputs, std::function<void(Node<T>&)> backward) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  if (!grad_enabled()) return Var<T>(std::move(n));
  bool any = false;
  for (const auto& v : inputs) any = any || v.requires_grad();
  if (!any) return Var<T>(std::move(n));
  n->requires_grad = true;
  n->parents.reserve(inputs.size());
  for (auto& v : inputs) n->parents.push_back(v.node_ptr());
  n->backward_fn = std::move(backward);
  return Var<T>(std::move(n));
}

/// Runs reverse accumulation from a scalar root. Gradients accumulate into
/// every reachable node that requires them, including parameter bindings.
template <typename T>
void backward(const Var<T>& root, T seed = T(1)) {
  if (!root.defined() || !root.requires_grad()) return;
  if (root.value().size() != 1) throw ShapeError("backward() root must be a scalar");

  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{root.node(), 0}};
  seen.insert(root.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && n->grad.size() == n->value.size()) n->backward_fn(*n);
  }
}

/// A named trainable tensor owned by a module.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}
  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    grad.fill(T(0));
  }
};

/// Puts a parameter into the current graph. Gradients flowing into the
/// returned leaf are added to `p.grad` during backward().
template <typename T>
Var<T> bind(Parameter<T>& p) {
  auto n = std::make_shared<Node<T>>();
  n->value = p.value;
  if (!grad_enabled()) return Var<T>(std::move(n));
  n->requires_grad = true;
  Parameter<T>* target = &p;
  n->backward_fn = [target](Node<T>& self) {
    if (target->grad.shape() != target->value.shape()) target->grad = Tensor<T>(target->value.shape());
    T* g = target->grad.data();
    const T* s = self.grad.data();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += s[i];
  };
  return Var<T>(std::move(n));
}

}  // namespace gcbase::ad
