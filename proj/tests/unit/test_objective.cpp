// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "pnf/objective.hpp"
#include "pnf/synthgen.hpp"
#include "support.hpp"

namespace pnf::objective {
namespace {

TEST(Bce, Examples) {
  EXPECT_NEAR(binary_cross_entropy(0.0, 0.5), std::log(2.0), 1e-15);
  EXPECT_NEAR(binary_cross_entropy(0.5, 0.5), std::log(2.0), 1e-15);
  const double oracle = -0.4 * std::log(0.6) - 0.6 * std::log(0.4);
  EXPECT_NEAR(oracle, 0.7541046886, 1e-10);
  EXPECT_NEAR(binary_cross_entropy(0.4, 0.6), oracle, 1e-15);
  EXPECT_NEAR(binary_cross_entropy(1.0, 0.0), -std::log(kEps), 1e-9);
  EXPECT_NEAR(binary_cross_entropy(0.0, 1.0), -std::log(kEps), 1e-6);
  EXPECT_THROW(binary_cross_entropy(1.2, 0.5), InvalidInput);
  EXPECT_THROW(binary_cross_entropy(0.5, std::nan("")), InvalidInput);
}

TEST(Bce, MinimisedAtTarget) {
  for (int i = 0; i <= 20; ++i) {
    const double p = i / 20.0;
    for (int j = 0; j <= 100; ++j) {
      const double q = j / 100.0;
      EXPECT_GE(binary_cross_entropy(p, q) + 1e-12, binary_cross_entropy(p, std::clamp(p, kEps, 1 - kEps)))
          << p << " " << q;
    }
  }
}

TEST(HeatmapLoss, UniformHeatmapExample) {
  const Mask needle = test::band_mask(32, 10, 4, 4, 20);
  const Grid<double> h(32, 32, 0.2);
  const double oracle = -0.7 * std::log(0.2) - 0.3 * std::log(0.8);
  EXPECT_NEAR(oracle, 1.1935496041, 1e-10);
  EXPECT_NEAR(heatmap_loss(h, needle, 0.7), oracle, 1e-12);
  EXPECT_NEAR(predicted_involvement(h, needle), 0.2, 1e-15);
}

TEST(HeatmapLoss, OnlyMaskPixelsCount) {
  const Mask needle = test::band_mask(16, 4, 2, 2, 5);
  Grid<double> h(16, 16, 0.9);
  for (std::size_t i = 0; i < h.size(); ++i)
    if (needle.data[i]) h.data[i] = 0.25;
  EXPECT_DOUBLE_EQ(predicted_involvement(h, needle), 0.25);
  EXPECT_THROW(predicted_involvement(h, Mask(16, 16, 0)), InvalidInput);
  EXPECT_THROW(predicted_involvement(h, Mask(8, 8, 1)), InvalidInput);
}

TEST(HeatmapLoss, InvolvementEqualsOracleOnRenderedCores) {
  synth::NeedleSpec needle;
  for (int s = 0; s < 10; ++s) {
    synth::LesionSpec lesion{100.0 + 5 * s, 128, 20.0 + s, 40, 0.5, 1.0};
    const auto r = synth::render_core(s, lesion, needle);
    Grid<double> h(r.lesion_mask.rows, r.lesion_mask.cols);
    for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = r.lesion_mask.data[i] ? 1.0 : 0.0;
    EXPECT_NEAR(predicted_involvement(h, r.needle_mask), synth::oracle_involvement(r.needle_mask, r.lesion_mask),
                1e-12);
  }
}

TEST(RiskLoss, Examples) {
  EXPECT_NEAR(risk_loss(1, 0.25), std::log(4.0), 1e-15);
  EXPECT_NEAR(risk_loss(0, 0.25), -std::log(0.75), 1e-15);
  EXPECT_THROW(risk_loss(2, 0.5), InvalidInput);
}

struct Batch {
  std::vector<ModelOutput> outs;
  std::vector<Mask> masks;
  std::vector<LossItem> items;

  explicit Batch(std::uint64_t seed, int n = 4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    outs.resize(n);
    masks.resize(n);
    for (int i = 0; i < n; ++i) {
      Grid<double> h(16, 16);
      for (auto& v : h.data) v = u(rng);
      outs[i].heatmap = h;
      outs[i].risk = u(rng);
      masks[i] = test::band_mask(16, 6, 3, 2, 10);
    }
    for (int i = 0; i < n; ++i) {
      const int gg = static_cast<int>(rng() % 6);
      items.push_back({&outs[i], grade_to_labels(gg), &masks[i], gg ? u(rng) : 0.0});
    }
  }
};

TEST(TotalLoss, SumOfBatchMeans) {
  Batch b(1);
  const auto l = total_loss(b.items);
  double h = 0, r = 0;
  for (const auto& it : b.items) {
    h += heatmap_loss(*it.output->heatmap, *it.needle_mask, it.involvement);
    r += risk_loss(it.labels.is_cspca, *it.output->risk);
  }
  EXPECT_NEAR(l.l_hmap, h / 4, 1e-12);
  EXPECT_NEAR(l.l_cspca, r / 4, 1e-12);
  EXPECT_DOUBLE_EQ(l.total, l.l_hmap + l.l_cspca);
}

TEST(TotalLoss, DuplicatingTheBatchLeavesItUnchanged) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Batch b(seed);
    std::vector<LossItem> twice = b.items;
    twice.insert(twice.end(), b.items.begin(), b.items.end());
    EXPECT_NEAR(total_loss(twice).total, total_loss(b.items).total, 1e-12);
  }
}

TEST(TotalLoss, MissingHeadDropsItsTerm) {
  Batch b(2);
  for (auto& o : b.outs) o.risk.reset();
  const auto l = total_loss(b.items);
  EXPECT_EQ(l.l_cspca, 0.0);
  EXPECT_EQ(l.total, l.l_hmap);
  b.outs[0].risk = 0.3;
  EXPECT_THROW(total_loss(b.items), InvalidInput);
  EXPECT_THROW(total_loss(std::span<const LossItem>{}), InvalidInput);
}

TEST(TotalLoss, PositiveWeightScalesOnlyPositives) {
  Batch b(3);
  LossOptions w;
  w.positive_weight = 3.0;
  double pos = 0;
  for (const auto& it : b.items)
    if (it.labels.is_cspca) pos += risk_loss(1, *it.output->risk);
  EXPECT_NEAR(total_loss(b.items, w).l_cspca - total_loss(b.items).l_cspca, 2.0 * pos / 4, 1e-12);
}

// The tape version must agree with the direct computation.
TEST(TotalLoss, TapeMatchesDirect) {
  Batch b(4);
  nn::Tape<double> tape(false);
  std::vector<std::vector<int>> px;
  for (const auto& m : b.masks) px.push_back(mask_pixels(m));
  std::vector<TapeItem<double>> items;
  for (std::size_t i = 0; i < b.items.size(); ++i) {
    TapeItem<double> t;
    nn::Tensor<double> h({16, 16, 1});
    std::copy(b.outs[i].heatmap->data.begin(), b.outs[i].heatmap->data.end(), h.data.begin());
    t.heatmap = tape.constant(h);
    t.risk = tape.constant(nn::Tensor<double>({1, 1}, *b.outs[i].risk));
    t.labels = b.items[i].labels;
    t.mask_pixels = px[i];
    t.involvement = b.items[i].involvement;
    items.push_back(t);
  }
  LossBreakdown br;
  const auto v = total_loss<double>(items, {}, &br);
  const auto ref = total_loss(b.items);
  EXPECT_NEAR(v.value().data[0], ref.total, 1e-12);
  EXPECT_NEAR(br.l_hmap, ref.l_hmap, 1e-12);
  EXPECT_NEAR(br.l_cspca, ref.l_cspca, 1e-12);
}

TEST(MaskPixels, RowMajorIndices) {
  Mask m(3, 4, 0);
  m(0, 1) = 1;
  m(2, 3) = 1;
  EXPECT_EQ(mask_pixels(m), (std::vector<int>{1, 11}));
}

}  // namespace
}  // namespace pnf::objective
