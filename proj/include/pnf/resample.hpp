// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace pnf {

/// Two-tap linear interpolation weights for one output coordinate.
struct LinearTap {
  int lo = 0;
  int hi = 0;
  double w_lo = 1.0;
  double w_hi = 0.0;
};

/// Half-pixel-centre (align_corners = false) taps mapping `in` samples onto
/// `out` samples along one axis. Source coordinates are clamped to the edge.
std::vector<LinearTap> linear_taps(int in, int out);

}  // namespace pnf
