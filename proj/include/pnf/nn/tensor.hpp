// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pnf/error.hpp"

namespace pnf::nn {

/// Storage aligned to Eigen's widest packet, so vectorised reductions never
/// peel a heap-address-dependent prefix and sums come out identical run to run.
template <typename T>
using AlignedVector = std::vector<T, Eigen::aligned_allocator<T>>;

/// Contiguous row-major n-d array. Matrices are {rows, cols}; feature maps
/// are {H, W, C} so that a map and its token matrix share one layout.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  AlignedVector<T> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)), data(count(shape), fill) {}
  Tensor(std::vector<int> s, AlignedVector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape)) throw InvalidInput("Tensor: data size does not match shape");
  }
  Tensor(std::vector<int> s, const std::vector<T>& d) : shape(std::move(s)), data(d.begin(), d.end()) {
    if (data.size() != count(shape)) throw InvalidInput("Tensor: data size does not match shape");
  }

  static std::size_t count(const std::vector<int>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }
  std::size_t numel() const { return data.size(); }
  /// Product of all leading dimensions.
  int rows() const { return shape.empty() ? 1 : static_cast<int>(numel() / cols_or_one()); }
  int cols() const { return shape.empty() ? 1 : shape.back(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out;
    out.shape = shape;
    out.data.assign(data.begin(), data.end());
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t cols_or_one() const { return shape.back() == 0 ? 1 : static_cast<std::size_t>(shape.back()); }
};

std::string shape_string(const std::vector<int>& shape);

}  // namespace pnf::nn
