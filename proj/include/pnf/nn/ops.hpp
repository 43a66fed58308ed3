// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "pnf/nn/tape.hpp"

namespace pnf::nn {

// Matrix ops treat a tensor as {rows(), cols()}: every leading dimension is
// folded into rows. All ops are instantiated for float and double.

/// a[n,k] * b[k,m]
template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

/// a[n,k] * b[m,k]^T
template <typename T>
Var<T> matmul_nt(Var<T> a, Var<T> b);

/// x[n,k] * w[k,m] + bias[m]
template <typename T>
Var<T> linear(Var<T> x, Var<T> w, Var<T> bias);

/// x[n,m] + bias[m], broadcast over rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

/// Elementwise sum; shapes must have equal element counts. Result takes a's shape.
template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> a, double s);

/// Tanh-approximated GELU.
template <typename T>
Var<T> gelu(Var<T> x);

template <typename T>
Var<T> sigmoid(Var<T> x);

/// Normalises each row over its last dimension.
template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gamma, Var<T> beta, double eps = 1e-5);

/// Scaled dot-product attention with `heads` heads over already-projected
/// q[nq,d], k[nk,d], v[nk,d]. Softmax probabilities are kept only when the
/// tape records gradients.
template <typename T>
Var<T> attention(Var<T> q, Var<T> k, Var<T> v, int heads);

template <typename T>
Var<T> concat_rows(std::span<const Var<T>> parts);

template <typename T>
Var<T> slice_rows(Var<T> x, int begin, int count);

template <typename T>
Var<T> reshape(Var<T> x, std::vector<int> shape);

/// Kernel-2, stride-2 transposed convolution of an {H,W,C} map.
/// w is [C, 4*Cout] laid out as (dy*2+dx)*Cout + co; bias is [Cout].
template <typename T>
Var<T> conv_transpose2x2(Var<T> x, Var<T> w, Var<T> bias);

/// Half-pixel-centre bilinear resize of an {H,W,C} map to {out_h,out_w,C}.
template <typename T>
Var<T> upsample_bilinear(Var<T> x, int out_h, int out_w);

/// upsample_bilinear evaluated only at the flat output indices `pixels`:
/// row i of the {n, C} result equals output pixel pixels[i], bit for bit.
template <typename T>
Var<T> upsample_bilinear_at(Var<T> x, int out_h, int out_w, std::span<const int> pixels);

/// Mean of x over the flat indices in `pixels` (non-empty).
template <typename T>
Var<T> masked_mean(Var<T> x, std::span<const int> pixels);

/// -p ln q - (1-p) ln(1-q) with q clamped to [eps, 1-eps]. The clamp has
/// zero derivative outside the interval.
template <typename T>
Var<T> binary_cross_entropy(Var<T> prediction, double target, double eps);

template <typename T>
Var<T> sum(Var<T> x);

}  // namespace pnf::nn
