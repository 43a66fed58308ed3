// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "pnf/nn/adam.hpp"
#include "pnf/nn/ops.hpp"
#include "pnf/nn/params.hpp"

namespace pnf::nn {
namespace {

using TD = Tensor<double>;
using VD = Var<double>;
using Fn = std::function<VD(Tape<double>&, std::vector<VD>&)>;

TD rand_tensor(std::vector<int> shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  TD t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (auto& v : t.data) v = u(rng);
  return t;
}

// Contracts a non-scalar output with fixed weights so every output element
// contributes to the checked scalar.
VD contract(Tape<double>& tape, VD out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(out.value().numel());
  VD flat = reshape(out, {1, n});
  VD w = tape.constant(rand_tensor({n, 1}, rng));
  return matmul(flat, w);
}

double eval(const std::vector<TD>& inputs, const Fn& f) {
  Tape<double> tape(false);
  std::vector<VD> vars;
  for (const auto& t : inputs) vars.push_back(tape.constant(t));
  return contract(tape, f(tape, vars), 99).value().data[0];
}

// Largest relative discrepancy between tape gradients and central differences.
double gradcheck(std::vector<TD> inputs, const Fn& f, double h = 1e-6) {
  std::vector<TD> grads;
  for (const auto& t : inputs) grads.emplace_back(t.shape);
  {
    Tape<double> tape;
    std::vector<VD> vars;
    for (std::size_t i = 0; i < inputs.size(); ++i) vars.push_back(tape.parameter(inputs[i], &grads[i]));
    tape.backward(contract(tape, f(tape, vars), 99));
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      const double x0 = inputs[i].data[j];
      inputs[i].data[j] = x0 + h;
      const double up = eval(inputs, f);
      inputs[i].data[j] = x0 - h;
      const double dn = eval(inputs, f);
      inputs[i].data[j] = x0;
      const double num = (up - dn) / (2 * h);
      const double ana = grads[i].data[j];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-4}));
    }
  return worst;
}

constexpr double kTol = 1e-6;

TEST(Ops, MatmulFamilyGradients) {
  std::mt19937_64 rng(1);
  EXPECT_LT(gradcheck({rand_tensor({3, 4}, rng), rand_tensor({4, 5}, rng)},
                      [](auto&, auto& v) { return matmul(v[0], v[1]); }),
            kTol);
  EXPECT_LT(gradcheck({rand_tensor({3, 4}, rng), rand_tensor({5, 4}, rng)},
                      [](auto&, auto& v) { return matmul_nt(v[0], v[1]); }),
            kTol);
  EXPECT_LT(gradcheck({rand_tensor({3, 4}, rng), rand_tensor({4, 2}, rng), rand_tensor({2}, rng)},
                      [](auto&, auto& v) { return linear(v[0], v[1], v[2]); }),
            kTol);
  EXPECT_LT(gradcheck({rand_tensor({3, 4}, rng), rand_tensor({4}, rng)},
                      [](auto&, auto& v) { return add_bias(v[0], v[1]); }),
            kTol);
  EXPECT_LT(gradcheck({rand_tensor({3, 4}, rng), rand_tensor({3, 4}, rng)},
                      [](auto&, auto& v) { return scale(add(v[0], v[1]), -0.7); }),
            kTol);
}

TEST(Ops, PointwiseGradients) {
  std::mt19937_64 rng(2);
  EXPECT_LT(gradcheck({rand_tensor({4, 6}, rng, -3, 3)}, [](auto&, auto& v) { return gelu(v[0]); }), kTol);
  EXPECT_LT(gradcheck({rand_tensor({4, 6}, rng, -3, 3)}, [](auto&, auto& v) { return sigmoid(v[0]); }), kTol);
}

TEST(Ops, GeluMatchesTanhFormula) {
  std::mt19937_64 rng(3);
  Tape<double> tape(false);
  const TD x = rand_tensor({50, 3}, rng, -5, 5);
  const TD y = gelu(tape.constant(x)).value();
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const double v = x.data[i];
    const double ref = 0.5 * v * (1 + std::tanh(std::sqrt(2 / M_PI) * (v + 0.044715 * v * v * v)));
    EXPECT_NEAR(y.data[i], ref, 1e-14);
  }
}

TEST(Ops, LayerNormMatchesOracleAndGradients) {
  std::mt19937_64 rng(4);
  const TD x = rand_tensor({5, 8}, rng, -2, 2), g = rand_tensor({8}, rng), b = rand_tensor({8}, rng);
  Tape<double> tape(false);
  const TD y = layer_norm(tape.constant(x), tape.constant(g), tape.constant(b)).value();
  for (int r = 0; r < 5; ++r) {
    double m = 0, v = 0;
    for (int c = 0; c < 8; ++c) m += x.data[r * 8 + c];
    m /= 8;
    for (int c = 0; c < 8; ++c) v += (x.data[r * 8 + c] - m) * (x.data[r * 8 + c] - m);
    v /= 8;
    for (int c = 0; c < 8; ++c)
      EXPECT_NEAR(y.data[r * 8 + c], (x.data[r * 8 + c] - m) / std::sqrt(v + 1e-5) * g.data[c] + b.data[c], 1e-12);
  }
  EXPECT_LT(gradcheck({x, g, b}, [](auto&, auto& v) { return layer_norm(v[0], v[1], v[2]); }), kTol);
}

TEST(Ops, AttentionMatchesNaiveMultiHead) {
  std::mt19937_64 rng(5);
  const int nq = 3, nk = 5, d = 8, heads = 2, dh = d / heads;
  const TD q = rand_tensor({nq, d}, rng), k = rand_tensor({nk, d}, rng), v = rand_tensor({nk, d}, rng);
  Tape<double> tape(false);
  const TD y = attention(tape.constant(q), tape.constant(k), tape.constant(v), heads).value();
  for (int h = 0; h < heads; ++h)
    for (int i = 0; i < nq; ++i) {
      std::vector<double> s(nk);
      double mx = -1e300;
      for (int j = 0; j < nk; ++j) {
        double dot = 0;
        for (int c = 0; c < dh; ++c) dot += q.data[i * d + h * dh + c] * k.data[j * d + h * dh + c];
        s[j] = dot / std::sqrt(static_cast<double>(dh));
        mx = std::max(mx, s[j]);
      }
      double z = 0;
      for (double& x : s) z += (x = std::exp(x - mx));
      for (int c = 0; c < dh; ++c) {
        double o = 0;
        for (int j = 0; j < nk; ++j) o += s[j] / z * v.data[j * d + h * dh + c];
        EXPECT_NEAR(y.data[i * d + h * dh + c], o, 1e-12);
      }
    }
  EXPECT_LT(gradcheck({q, k, v}, [](auto&, auto& x) { return attention(x[0], x[1], x[2], 2); }), kTol);
}

TEST(Ops, AttentionIsPermutationEquivariantInKeys) {
  std::mt19937_64 rng(6);
  const TD q = rand_tensor({2, 4}, rng), k = rand_tensor({3, 4}, rng), v = rand_tensor({3, 4}, rng);
  TD k2 = k, v2 = v;
  for (int c = 0; c < 4; ++c) {
    std::swap(k2.data[c], k2.data[8 + c]);
    std::swap(v2.data[c], v2.data[8 + c]);
  }
  Tape<double> tape(false);
  const TD a = attention(tape.constant(q), tape.constant(k), tape.constant(v), 1).value();
  const TD b = attention(tape.constant(q), tape.constant(k2), tape.constant(v2), 1).value();
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a.data[i], b.data[i], 1e-14);
}

TEST(Ops, RowOpsGradients) {
  std::mt19937_64 rng(7);
  EXPECT_LT(gradcheck({rand_tensor({2, 3}, rng), rand_tensor({4, 3}, rng)},
                      [](auto&, auto& v) {
                        std::vector<VD> parts = {v[0], v[1]};
                        return slice_rows(concat_rows<double>(std::span<const VD>(parts)), 1, 4);
                      }),
            kTol);
  EXPECT_LT(gradcheck({rand_tensor({2, 6}, rng)}, [](auto&, auto& v) { return reshape(v[0], {3, 4}); }), kTol);
  EXPECT_LT(gradcheck({rand_tensor({2, 6}, rng)}, [](auto&, auto& v) { return sum(v[0]); }), kTol);
}

TEST(Ops, ConvTransposeMatchesDirectLoops) {
  std::mt19937_64 rng(8);
  const int H = 3, W = 2, C = 3, Co = 2;
  const TD x = rand_tensor({H, W, C}, rng), w = rand_tensor({C, 4 * Co}, rng), b = rand_tensor({Co}, rng);
  Tape<double> tape(false);
  const TD y = conv_transpose2x2(tape.constant(x), tape.constant(w), tape.constant(b)).value();
  ASSERT_EQ(y.shape, (std::vector<int>{2 * H, 2 * W, Co}));
  for (int h = 0; h < H; ++h)
    for (int ww = 0; ww < W; ++ww)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx)
          for (int co = 0; co < Co; ++co) {
            double ref = b.data[co];
            for (int c = 0; c < C; ++c) ref += x.data[(h * W + ww) * C + c] * w.data[c * 4 * Co + (dy * 2 + dx) * Co + co];
            EXPECT_NEAR(y.data[((2 * h + dy) * 2 * W + 2 * ww + dx) * Co + co], ref, 1e-12);
          }
  EXPECT_LT(gradcheck({x, w, b}, [](auto&, auto& v) { return conv_transpose2x2(v[0], v[1], v[2]); }), kTol);
}

double bilinear_ref(const TD& x, int oh, int ow, int r, int c, int ch) {
  const int H = x.shape[0], W = x.shape[1], C = x.shape[2];
  auto coord = [](int o, int in, int out) {
    return std::clamp((o + 0.5) * in / out - 0.5, 0.0, static_cast<double>(in - 1));
  };
  const double y = coord(r, H, oh), xx = coord(c, W, ow);
  const int y0 = static_cast<int>(y), x0 = static_cast<int>(xx);
  const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
  const double fy = y - y0, fx = xx - x0;
  auto at = [&](int a, int b) { return x.data[(a * W + b) * C + ch]; };
  return (at(y0, x0) * (1 - fx) + at(y0, x1) * fx) * (1 - fy) + (at(y1, x0) * (1 - fx) + at(y1, x1) * fx) * fy;
}

TEST(Ops, BilinearUpsampleMatchesOracle) {
  std::mt19937_64 rng(9);
  const TD x = rand_tensor({3, 4, 2}, rng);
  Tape<double> tape(false);
  const TD y = upsample_bilinear(tape.constant(x), 7, 9).value();
  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 9; ++c)
      for (int ch = 0; ch < 2; ++ch) EXPECT_NEAR(y.data[(r * 9 + c) * 2 + ch], bilinear_ref(x, 7, 9, r, c, ch), 1e-12);
  EXPECT_LT(gradcheck({x}, [](auto&, auto& v) { return upsample_bilinear(v[0], 7, 9); }), kTol);
}

TEST(Ops, SampledUpsampleIsBitIdentical) {
  std::mt19937_64 rng(10);
  const Tensor<float> x = rand_tensor({8, 8, 3}, rng).cast<float>();
  std::vector<int> px;
  for (int i = 0; i < 32 * 32; i += 7) px.push_back(i);
  Tape<float> tape(false);
  const auto full = upsample_bilinear(tape.constant(x), 32, 32).value();
  const auto part = upsample_bilinear_at(tape.constant(x), 32, 32, px).value();
  ASSERT_EQ(part.shape, (std::vector<int>{static_cast<int>(px.size()), 3}));
  for (std::size_t i = 0; i < px.size(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(part.data[i * 3 + c], full.data[px[i] * 3 + c]);
  const std::vector<int> some = {0, 5, 17, 63};
  EXPECT_LT(gradcheck({rand_tensor({4, 4, 2}, rng)},
                      [&](auto&, auto& v) { return upsample_bilinear_at(v[0], 8, 8, some); }),
            kTol);
}

TEST(Ops, MaskedMeanAndBce) {
  std::mt19937_64 rng(11);
  const std::vector<int> px = {1, 4, 5};
  const TD x = rand_tensor({3, 3, 1}, rng, 0.1, 0.9);
  Tape<double> tape(false);
  const double m = masked_mean(tape.constant(x), px).value().data[0];
  EXPECT_NEAR(m, (x.data[1] + x.data[4] + x.data[5]) / 3, 1e-15);
  EXPECT_LT(gradcheck({x}, [&](auto&, auto& v) { return masked_mean(v[0], px); }), kTol);
  EXPECT_LT(gradcheck({rand_tensor({1, 1}, rng, 0.2, 0.8)},
                      [](auto&, auto& v) { return binary_cross_entropy(v[0], 0.3, 1e-6); }),
            kTol);
  TD q({1, 1});
  q.data[0] = 0.6;
  EXPECT_NEAR(binary_cross_entropy(tape.constant(q), 0.4, 1e-6).value().data[0],
              -0.4 * std::log(0.6) - 0.6 * std::log(0.4), 1e-14);
}

TEST(Ops, BceClampHasZeroGradientOutside) {
  TD q({1, 1}), g({1, 1});
  q.data[0] = 0.0;
  Tape<double> tape;
  tape.backward(binary_cross_entropy(tape.parameter(q, &g), 1.0, 1e-6));
  EXPECT_EQ(g.data[0], 0.0);
}

TEST(Ops, ShapeErrors) {
  std::mt19937_64 rng(12);
  Tape<double> tape(false);
  EXPECT_THROW(matmul(tape.constant(rand_tensor({2, 3}, rng)), tape.constant(rand_tensor({2, 3}, rng))), InvalidInput);
  EXPECT_THROW(add(tape.constant(rand_tensor({2, 3}, rng)), tape.constant(rand_tensor({2, 2}, rng))), InvalidInput);
  EXPECT_THROW(attention(tape.constant(rand_tensor({2, 6}, rng)), tape.constant(rand_tensor({2, 6}, rng)),
                         tape.constant(rand_tensor({2, 6}, rng)), 4),
               InvalidInput);
}

TEST(ParamSet, AddIndexAndCast) {
  ParamSet<float> p;
  p.add("a", Tensor<float>({2, 2}, 1.0f));
  p.add("b", Tensor<float>({3}, 2.0f), false);
  EXPECT_THROW(p.add("a", Tensor<float>({1})), ConfigError);
  EXPECT_EQ(p.index("b"), 1);
  EXPECT_TRUE(p.contains("a"));
  EXPECT_FALSE(p.contains("c"));
  EXPECT_EQ(p.numel(), 7u);
  const auto d = p.cast<double>();
  EXPECT_EQ(d["b"].value.data[2], 2.0);
  EXPECT_FALSE(d.entries()[1].trainable);
  auto z = p.zeros_like();
  EXPECT_EQ(z["a"].value.data[0], 0.0f);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamSet<double> p;
  p.add("w", Tensor<double>({2}, 1.0));
  p.add("frozen", Tensor<double>({1}, 5.0), false);
  ParamSet<double> g = p.zeros_like();
  g["w"].value.data = {0.5, -2.0};
  g["frozen"].value.data = {1.0};
  Adam<double> adam(p, {});
  adam.step(p, g, 0.1);
  // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g).
  EXPECT_NEAR(p["w"].value.data[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
  EXPECT_NEAR(p["w"].value.data[1], 1.0 + 0.1 * 2.0 / (2.0 + 1e-8), 1e-12);
  EXPECT_EQ(p["frozen"].value.data[0], 5.0);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Adam, MatchesReferenceRecurrence) {
  ParamSet<double> p;
  p.add("w", Tensor<double>({1}, 0.3));
  Adam<double> adam(p, {0.9, 0.999, 1e-8, 0.01});
  double w = 0.3, m = 0, v = 0;
  for (int t = 1; t <= 20; ++t) {
    ParamSet<double> g = p.zeros_like();
    const double grad = std::sin(t) + 0.2;
    g["w"].value.data[0] = grad;
    adam.step(p, g, 0.05);
    const double gg = grad + 0.01 * w;
    m = 0.9 * m + 0.1 * gg;
    v = 0.999 * v + 0.001 * gg * gg;
    w -= 0.05 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(p["w"].value.data[0], w, 1e-12);
  }
}

}  // namespace
}  // namespace pnf::nn
