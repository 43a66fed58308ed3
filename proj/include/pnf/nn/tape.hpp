// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <initializer_list>

#include "pnf/nn/tensor.hpp"

namespace pnf::nn {

template <typename T>
class Tape;

/// Handle to a node on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Tensor<T>& value() const { return tape->value(id); }
  const std::vector<int>& shape() const { return value().shape; }
};

/// Reverse-mode autodiff record for one forward pass. Nodes live in a deque
/// so references to values stay valid while the tape grows.
template <typename T>
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var<T> constant(Tensor<T> value) {
    Node n;
    n.own = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  /// Leaf aliasing an external tensor. Gradients are accumulated into
  /// `grad_sink` after backward(); a null sink makes the leaf a constant.
  Var<T> parameter(const Tensor<T>& value, Tensor<T>* grad_sink) {
    Node n;
    n.external = &value;
    n.sink = grad_enabled_ ? grad_sink : nullptr;
    n.requires_grad = n.sink != nullptr;
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<T> record(Tensor<T> value, std::initializer_list<int> inputs, Backward backward) {
    return record(std::move(value), std::vector<int>(inputs), std::move(backward));
  }

  Var<T> record(Tensor<T> value, const std::vector<int>& inputs, Backward backward) {
    Node n;
    n.own = std::move(value);
    if (grad_enabled_)
      for (int in : inputs)
        if (nodes_[in].requires_grad) n.requires_grad = true;
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor<T>& value(int id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.own;
  }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, zero-initialised on first use.
  Tensor<T>& grad(int id) {
    Node& n = nodes_[id];
    if (n.grad.data.empty() && value(id).numel() > 0) n.grad = Tensor<T>(value(id).shape);
    return n.grad;
  }
  bool has_grad(int id) const { return !nodes_[id].grad.data.empty(); }

  void backward(Var<T> root, T seed = T(1)) {
    if (!grad_enabled_) throw InvalidInput("backward() on a tape with gradients disabled");
    if (value(root.id).numel() != 1) throw InvalidInput("backward() root must be a scalar");
    if (!requires_grad(root.id)) return;
    grad(root.id).data[0] += seed;
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.data.empty()) continue;
      if (n.backward) n.backward(*this, id);
      if (n.sink) {
        auto& dst = n.sink->data;
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += n.grad.data[i];
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    Tensor<T>* sink = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
};

}  // namespace pnf::nn
