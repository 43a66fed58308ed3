// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <gtest/gtest.h>

#include "pnf/error.hpp"
#include "pnf/riskscore.hpp"
#include "support.hpp"

namespace pnf::risk {
namespace {

std::vector<int> occupancy(std::span<const double> scores, const RiskBins& b) {
  std::vector<int> n(5, 0);
  for (double s : scores) ++n[discretize(s, b) - 1];
  return n;
}

TEST(FitBins, UniformReferenceGivesQuintiles) {
  std::vector<double> scores;
  for (int i = 0; i < 100; ++i) scores.push_back((i + 0.5) / 100);
  const RiskBins b = fit_bins(scores, ReferenceCounts{10, 10, 10, 10, 10});
  EXPECT_EQ(occupancy(scores, b), (std::vector<int>{20, 20, 20, 20, 20}));
}

TEST(FitBins, SmallWorkedExample) {
  const std::vector<double> model = {0.1, 0.3, 0.5, 0.7, 0.9};
  const std::vector<int> ref = {1, 1, 2, 3, 5};
  const RiskBins b = fit_bins(model, ref);
  EXPECT_EQ(b.t, (std::array<double, 4>{0.5, 0.7, 0.9, 0.9}));
  std::vector<int> got;
  for (double s : model) got.push_back(discretize(s, b));
  EXPECT_EQ(got, (std::vector<int>{1, 1, 2, 3, 5}));
}

TEST(FitBins, DegenerateReferenceCollapsesToOneBin) {
  const std::vector<double> model = {0.2, 0.4, 0.6};
  const RiskBins b = fit_bins(model, ReferenceCounts{0, 0, 7, 0, 0});
  EXPECT_EQ(b.t[0], 0.0);
  EXPECT_EQ(b.t[1], 0.0);
  EXPECT_GT(b.t[2], 0.6);
  EXPECT_LE(b.t[2], 1.0);
  EXPECT_EQ(b.t[3], b.t[2]);
  for (double s : model) EXPECT_EQ(discretize(s, b), 3);
}

TEST(FitBins, SentinelNeverExceedsOne) {
  const std::vector<double> model = {0.5, 1.0};
  const RiskBins b = fit_bins(model, ReferenceCounts{1, 0, 0, 0, 0});
  EXPECT_EQ(b.t[1], 1.0);
  EXPECT_NO_THROW(b.validate());
}

TEST(FitBins, OccupancyMatchesReferenceFractions) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cnt(0, 50);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> scores(1000);
    for (auto& s : scores) s = u(rng);
    ReferenceCounts ref{};
    long long total = 0;
    while (total == 0) {
      for (auto& c : ref) c = cnt(rng);
      total = 0;
      for (auto c : ref) total += c;
    }
    const RiskBins b = fit_bins(scores, ref);
    EXPECT_NO_THROW(b.validate());
    const auto occ = occupancy(scores, b);
    for (int g = 0; g < 5; ++g)
      EXPECT_NEAR(occ[g] / 1000.0, static_cast<double>(ref[g]) / total, 0.01) << "trial " << trial << " bin " << g;
  }
}

TEST(FitBins, Rejects) {
  const std::vector<double> model = {0.5};
  EXPECT_THROW(fit_bins(std::vector<double>{}, ReferenceCounts{1, 1, 1, 1, 1}), InvalidInput);
  EXPECT_THROW(fit_bins(model, ReferenceCounts{0, 0, 0, 0, 0}), InvalidInput);
  EXPECT_THROW(fit_bins(std::vector<double>{1.5}, ReferenceCounts{1, 1, 1, 1, 1}), InvalidInput);
  EXPECT_THROW(count_reference(std::vector<int>{0, 2}), InvalidInput);
  EXPECT_EQ(count_reference(std::vector<int>{1, 5, 5, 2}), (ReferenceCounts{1, 1, 0, 0, 2}));
}

TEST(Discretize, BoundariesAndMonotonicity) {
  RiskBins b;
  b.t = {0.2, 0.4, 0.6, 0.8};
  EXPECT_EQ(discretize(0.0, b), 1);
  EXPECT_EQ(discretize(0.2, b), 2);
  EXPECT_EQ(discretize(std::nextafter(0.2, 0.0), b), 1);
  EXPECT_EQ(discretize(0.8, b), 5);
  EXPECT_EQ(discretize(1.0, b), 5);
  EXPECT_THROW(discretize(-0.01, b), InvalidInput);
  EXPECT_THROW(discretize(std::nan(""), b), InvalidInput);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    std::array<double, 4> t;
    for (auto& x : t) x = u(rng);
    std::sort(t.begin(), t.end());
    b.t = t;
    double a = u(rng), c = u(rng);
    if (a > c) std::swap(a, c);
    EXPECT_LE(discretize(a, b), discretize(c, b));
  }
}

TEST(RiskBins, ValidateRejectsDisorder) {
  RiskBins b;
  b.t = {0.3, 0.2, 0.5, 0.6};
  EXPECT_THROW(b.validate(), InvalidInput);
  b.t = {0.1, 0.2, 0.5, 1.2};
  EXPECT_THROW(b.validate(), InvalidInput);
}

TEST(PatientMax, TakesMaximum) {
  EXPECT_EQ(patient_max_score(std::vector<int>{1, 4, 2}), 4);
  EXPECT_EQ(patient_max_score(std::vector<int>{3}), 3);
  EXPECT_THROW(patient_max_score(std::vector<int>{}), InvalidInput);
  EXPECT_THROW(patient_max_score(std::vector<int>{2, 6}), InvalidInput);
}

TEST(BinsFile, JsonAndFileRoundTrip) {
  BinsFile f;
  f.bins.t = {0.125, 1.0 / 3.0, 0.5, 0.9999999999};
  f.operating_threshold = 0.3141592653589793;
  f.provenance = {{"source", "unit"}};
  const BinsFile back = bins_from_json(to_json(f));
  EXPECT_EQ(back.bins, f.bins);
  EXPECT_EQ(back.operating_threshold, f.operating_threshold);
  EXPECT_EQ(back.provenance, f.provenance);

  test::TempDir dir;
  save_bins(dir / "bins.json", f);
  EXPECT_EQ(load_bins(dir / "bins.json").bins, f.bins);
  BinsFile none;
  EXPECT_FALSE(bins_from_json(to_json(none)).operating_threshold.has_value());
}

}  // namespace
}  // namespace pnf::risk
