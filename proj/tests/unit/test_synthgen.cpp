// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "pnf/dataset_io.hpp"
#include "pnf/metrics.hpp"
#include "pnf/synthgen.hpp"
#include "support.hpp"

namespace pnf {
namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

synth::GenConfig small(std::uint64_t seed) {
  synth::GenConfig g;
  g.n_subjects = 6;
  g.cores_per_subject = 4;
  g.seed = seed;
  return g;
}

TEST(Synthgen, SameSeedSameFiles) {
  test::TempDir a, b;
  const auto gen = synth::generate_dataset(small(7));
  synth::save_generated(gen, a.path());
  synth::save_generated(synth::generate_dataset(small(7)), b.path());
  EXPECT_EQ(slurp(a / "manifest.csv"), slurp(b / "manifest.csv"));
  EXPECT_EQ(slurp(a / "ground_truth/cores.csv"), slurp(b / "ground_truth/cores.csv"));
  const auto ds = load_dataset(a.path());
  for (std::size_t i = 0; i < ds.cores.size(); ++i) {
    EXPECT_EQ(ds.cores[i].involvement, gen.dataset.cores[i].involvement);
    EXPECT_EQ(ds.cores[i].needle_mask, gen.dataset.cores[i].needle_mask);
  }
  for (const auto& c : ds.cores)
    EXPECT_EQ(slurp(a / ("images/" + c.core_id + ".png")), slurp(b / ("images/" + c.core_id + ".png")));
  EXPECT_NE(slurp(a / "manifest.csv"), [] {
    test::TempDir c;
    synth::save_generated(synth::generate_dataset(small(8)), c.path());
    return slurp(c / "manifest.csv");
  }());
}

TEST(Synthgen, ZeroPrevalenceIsAllBenign) {
  auto g = small(1);
  g.lesion_prevalence = 0.0;
  const auto gen = synth::generate_dataset(g);
  for (const auto& c : gen.dataset.cores) {
    EXPECT_EQ(c.grade_group, 0);
    EXPECT_EQ(c.involvement, 0.0);
  }
}

TEST(Synthgen, RejectsDegenerateConfig) {
  auto g = small(1);
  g.n_subjects = 0;
  EXPECT_THROW(synth::generate_dataset(g), InvalidInput);
  g = small(1);
  g.metadata_signal = 1.5;
  EXPECT_THROW(synth::generate_dataset(g), InvalidInput);
  g = small(1);
  g.texture_contrast = -1;
  EXPECT_THROW(synth::generate_dataset(g), InvalidInput);
}

class SynthgenLarge : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synth::GenConfig g;
    g.n_subjects = 125;
    g.cores_per_subject = 8;
    g.lesion_prevalence = 0.3;
    g.seed = 2026;
    gen_ = new synth::Generated(synth::generate_dataset(g));
  }
  static void TearDownTestSuite() {
    delete gen_;
    gen_ = nullptr;
  }
  static synth::Generated* gen_;
};
synth::Generated* SynthgenLarge::gen_ = nullptr;

TEST_F(SynthgenLarge, PositiveFractionNearPrevalence) {
  int pos = 0;
  for (const auto& c : gen_->dataset.cores) pos += c.grade_group > 0;
  const double frac = static_cast<double>(pos) / gen_->dataset.cores.size();
  EXPECT_GE(frac, 0.25);
  EXPECT_LE(frac, 0.35);
}

TEST_F(SynthgenLarge, InvolvementEqualsOracleExactly) {
  ASSERT_EQ(gen_->truth.cores.size(), gen_->dataset.cores.size());
  for (std::size_t i = 0; i < gen_->dataset.cores.size(); ++i) {
    const auto& c = gen_->dataset.cores[i];
    const auto& t = gen_->truth.cores[i];
    ASSERT_EQ(c.core_id, t.core_id);
    EXPECT_EQ(c.involvement, synth::oracle_involvement(c.needle_mask, t.lesion_mask));
    EXPECT_EQ(c.grade_group, t.grade_group);
  }
}

TEST_F(SynthgenLarge, CancerCoresOverlapTheirLesion) {
  for (const auto& c : gen_->dataset.cores) {
    EXPECT_NO_THROW(c.validate());
    if (c.grade_group >= 3) {
      EXPECT_GT(c.involvement, 0.0) << c.core_id;
    }
  }
}

TEST(Synthgen, MetadataSignalControlsPsaCoupling) {
  auto run = [](double signal) {
    synth::GenConfig g;
    g.n_subjects = 1000;
    g.cores_per_subject = 1;
    g.image_size = 64;
    g.metadata_signal = signal;
    g.seed = 31;
    const auto gen = synth::generate_dataset(g);
    std::vector<double> psa, burden;
    std::vector<int> label;
    for (const auto& s : gen.dataset.subjects) {
      std::vector<CoreLabels> cl;
      for (const auto& c : gen.dataset.cores)
        if (c.subject_id == s.subject_id) cl.push_back(grade_to_labels(c.grade_group));
      psa.push_back(s.psa);
      label.push_back(subject_diagnosis(cl) != Category::benign ? 1 : 0);
    }
    return std::pair{psa, label};
  };
  {
    auto [psa, label] = run(0.0);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < psa.size(); ++i) mx += psa[i], my += label[i];
    mx /= psa.size();
    my /= psa.size();
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < psa.size(); ++i) {
      sxy += (psa[i] - mx) * (label[i] - my);
      sxx += (psa[i] - mx) * (psa[i] - mx);
      syy += (label[i] - my) * (label[i] - my);
    }
    EXPECT_LT(std::abs(sxy / std::sqrt(sxx * syy)), 0.1);
  }
  {
    auto [psa, label] = run(1.0);
    EXPECT_GE(metrics::auroc(psa, label), 0.8);
  }
}

TEST(RenderCore, ZeroContrastLesionIsInvisible) {
  synth::LesionSpec lesion{128, 128, 30, 50, 0.3, 0.0};
  synth::NeedleSpec needle;
  std::vector<double> diffs;
  for (int i = 0; i < 100; ++i) {
    const auto r = synth::render_core(1000 + i, lesion, needle);
    double in = 0, out = 0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t p = 0; p < r.image.size(); ++p) {
      const double l = std::log(std::max(r.image.data[p], 1e-6f));
      if (r.lesion_mask.data[p]) in += l, ++nin;
      else out += l, ++nout;
    }
    diffs.push_back(in / nin - out / nout);
  }
  double m = 0, v = 0;
  for (double d : diffs) m += d;
  m /= diffs.size();
  for (double d : diffs) v += (d - m) * (d - m);
  v /= diffs.size() - 1;
  const double t = m / std::sqrt(v / diffs.size());
  EXPECT_LT(std::abs(t), 2.626);  // two-sided alpha 0.01, 99 df
}

TEST(RenderCore, ContrastShiftsLogMean) {
  synth::LesionSpec lesion{128, 128, 30, 50, 0.3, 2.0};
  synth::NeedleSpec needle;
  double total = 0;
  const int n = 20;
  for (int i = 0; i < n; ++i) {
    const auto r = synth::render_core(500 + i, lesion, needle);
    double in = 0, out = 0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t p = 0; p < r.image.size(); ++p) {
      const double l = std::log(std::max(r.image.data[p], 1e-6f));
      if (r.lesion_mask.data[p]) in += l, ++nin;
      else out += l, ++nout;
    }
    total += in / nin - out / nout;
  }
  const double expected = 2.0 * synth::kLogShiftPerContrast;
  EXPECT_NEAR(total / n, expected, 0.1 * expected);
}

TEST(RenderCore, FullCoverGivesUnitInvolvement) {
  synth::LesionSpec lesion{128, 128, 60, 100, 0.0, 1.0};
  synth::NeedleSpec needle;
  const auto r = synth::render_core(3, lesion, needle);
  EXPECT_EQ(synth::oracle_involvement(r.needle_mask, r.lesion_mask), 1.0);
  const auto none = synth::render_core(3, std::nullopt, needle);
  EXPECT_EQ(synth::oracle_involvement(none.needle_mask, none.lesion_mask), 0.0);
}

TEST(RenderCore, BadSpecsRejected) {
  synth::NeedleSpec needle;
  needle.width = 2;
  EXPECT_THROW(synth::render_core(1, std::nullopt, needle), InvalidInput);
  needle = {};
  needle.cy = 10;
  EXPECT_THROW(synth::render_core(1, std::nullopt, needle), InvalidInput);
  synth::LesionSpec lesion{10, 10, 30, 30, 0.0, 1.0};
  EXPECT_THROW(synth::render_core(1, lesion, synth::NeedleSpec{}), InvalidInput);
}

TEST(OracleInvolvement, Counting) {
  Mask needle(4, 5, 0), lesion(4, 5, 0);
  for (int c = 0; c < 5; ++c) needle(1, c) = needle(2, c) = 1;  // 10 pixels
  for (int c = 0; c < 2; ++c) lesion(1, c) = lesion(2, c) = 1;  // 4 inside
  lesion(0, 0) = 1;
  EXPECT_DOUBLE_EQ(synth::oracle_involvement(needle, lesion), 0.4);
  EXPECT_EQ(synth::oracle_involvement(needle, Mask(4, 5, 0)), 0.0);
  EXPECT_THROW(synth::oracle_involvement(Mask(4, 5, 0), lesion), InvalidInput);
}

TEST(Synthgen, SeparabilityGrowsWithContrast) {
  auto stat_auroc = [](double contrast) {
    synth::GenConfig g;
    g.n_subjects = 40;
    g.cores_per_subject = 5;
    g.texture_contrast = contrast;
    g.seed = 12;
    const auto gen = synth::generate_dataset(g);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& c : gen.dataset.cores) {
      Grid<double> h(c.image.rows, c.image.cols);
      for (std::size_t i = 0; i < h.size(); ++i) h.data[i] = c.image.data[i];
      s.push_back(metrics::core_pca_score(h, c.needle_mask));
      y.push_back(c.grade_group > 0);
    }
    return metrics::auroc(s, y);
  };
  double prev = 0.0;
  for (double contrast : {0.0, 1.0, 2.0, 4.0}) {
    const double a = stat_auroc(contrast);
    EXPECT_GE(a, prev - 1e-12) << "contrast " << contrast;
    prev = a;
  }
  EXPECT_GT(prev, 0.8);
}

}  // namespace
}  // namespace pnf
