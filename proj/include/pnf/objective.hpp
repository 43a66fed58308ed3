// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pnf/backbone.hpp"

namespace pnf::objective {

/// Predictions are clamped to [kEps, 1 - kEps] before taking logs.
inline constexpr double kEps = 1e-6;

struct LossOptions {
  double eps = kEps;
  /// Multiplier on the risk term of csPCa-positive cores. 1 = unweighted.
  double positive_weight = 1.0;
};

struct LossBreakdown {
  double l_cspca = 0.0;
  double l_hmap = 0.0;
  double total = 0.0;
};

/// -p ln q - (1-p) ln(1-q), natural log, q clamped. Throws InvalidInput if
/// p is outside [0,1] or q is not finite.
double binary_cross_entropy(double target, double prediction, double eps = kEps);

/// Flat row-major indices of set mask pixels.
std::vector<int> mask_pixels(const Mask& mask);

/// Mean heatmap value over the needle mask. Throws InvalidInput on an empty
/// mask or mismatched sizes.
double predicted_involvement(const Grid<double>& heatmap, const Mask& needle_mask);
double predicted_involvement(const Grid<float>& heatmap, const Mask& needle_mask);

double heatmap_loss(const Grid<double>& heatmap, const Mask& needle_mask, double involvement, double eps = kEps);
double risk_loss(int label, double risk, double eps = kEps);

struct LossItem {
  const ModelOutput* output = nullptr;
  CoreLabels labels;
  const Mask* needle_mask = nullptr;
  double involvement = 0.0;
};

/// Per-term batch mean, then sum. A term is included when every item
/// carries the corresponding output and reported as 0 when none does.
LossBreakdown total_loss(std::span<const LossItem> batch, const LossOptions& opt = {});

/// Differentiable counterpart of total_loss on a tape.
template <typename T>
struct TapeItem {
  std::optional<nn::Var<T>> heatmap;
  std::optional<nn::Var<T>> risk;
  CoreLabels labels;
  std::span<const int> mask_pixels;
  double involvement = 0.0;
  /// The heatmap holds only the mask pixels (see Backbone::forward).
  bool heatmap_sampled = false;
};

template <typename T>
nn::Var<T> total_loss(std::span<const TapeItem<T>> batch, const LossOptions& opt, LossBreakdown* breakdown);

}  // namespace pnf::objective
