// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "pnf/nn/tape.hpp"

namespace pnf::nn {

/// Ordered, name-indexed collection of tensors. The same layout serves for
/// parameter values, gradients and optimiser moments.
template <typename T>
class ParamSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> value;
    bool trainable = true;
  };

  int add(std::string name, Tensor<T> value, bool trainable = true) {
    if (index_.count(name)) throw ConfigError("duplicate parameter '" + name + "'");
    const int i = static_cast<int>(entries_.size());
    index_.emplace(name, i);
    entries_.push_back({std::move(name), std::move(value), trainable});
    return i;
  }

  int index(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("unknown parameter '" + std::string(name) + "'");
    return it->second;
  }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

  Entry& operator[](int i) { return entries_[static_cast<std::size_t>(i)]; }
  const Entry& operator[](int i) const { return entries_[static_cast<std::size_t>(i)]; }
  Entry& operator[](std::string_view name) { return (*this)[index(name)]; }
  const Entry& operator[](std::string_view name) const { return (*this)[index(name)]; }

  int size() const { return static_cast<int>(entries_.size()); }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }

  std::size_t numel() const {
    std::size_t n = 0;
    for (const auto& e : entries_) n += e.value.numel();
    return n;
  }

  ParamSet zeros_like() const {
    ParamSet out;
    for (const auto& e : entries_) out.add(e.name, Tensor<T>(e.value.shape), e.trainable);
    return out;
  }

  void set_zero() {
    for (auto& e : entries_) std::fill(e.value.data.begin(), e.value.data.end(), T(0));
  }

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& e : entries_) out.add(e.name, e.value.template cast<U>(), e.trainable);
    return out;
  }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

/// Binds a ParamSet to a tape for one forward pass, creating each parameter
/// leaf on first use. Gradients of trainable parameters go to `grads`.
template <typename T>
class Graph {
 public:
  Graph(Tape<T>& tape, const ParamSet<T>& params, ParamSet<T>* grads = nullptr)
      : tape_(tape), params_(params), grads_(grads), cache_(static_cast<std::size_t>(params.size()), -1) {}

  Tape<T>& tape() { return tape_; }

  Var<T> param(int index) {
    int& id = cache_[static_cast<std::size_t>(index)];
    if (id < 0) {
      const auto& e = params_[index];
      Tensor<T>* sink = (grads_ && e.trainable) ? &(*grads_)[index].value : nullptr;
      id = tape_.parameter(e.value, sink).id;
    }
    return {&tape_, id};
  }

  Var<T> constant(Tensor<T> t) { return tape_.constant(std::move(t)); }

 private:
  Tape<T>& tape_;
  const ParamSet<T>& params_;
  ParamSet<T>* grads_;
  std::vector<int> cache_;
};

}  // namespace pnf::nn
