// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>

#include <json.hpp>

namespace pnf::risk {

/// Thresholds t1..t4 splitting [0,1] into [0,t1), [t1,t2), [t2,t3), [t3,t4), [t4,1].
struct RiskBins {
  std::array<double, 4> t{0.2, 0.4, 0.6, 0.8};

  /// Throws InvalidInput unless thresholds are in [0,1] and non-decreasing.
  void validate() const;
  bool operator==(const RiskBins&) const = default;
};

/// Counts of reference scores 1..5.
using ReferenceCounts = std::array<long long, 5>;

ReferenceCounts count_reference(std::span<const int> reference_scores);

/// Histogram matching: t_g is the nearest-rank order statistic of the model
/// scores at the cumulative reference fraction P(reference <= g).
RiskBins fit_bins(std::span<const double> model_scores, std::span<const int> reference_scores);
RiskBins fit_bins(std::span<const double> model_scores, const ReferenceCounts& reference);

/// 1 + number of thresholds the score reaches. Throws InvalidInput outside [0,1].
int discretize(double score, const RiskBins& bins);

/// Maximum core score. Throws InvalidInput on an empty list or a score outside 1..5.
int patient_max_score(std::span<const int> core_scores);

/// Bins plus free-form provenance; `operating_threshold` is the risk
/// probability chosen for single-threshold reporting.
struct BinsFile {
  RiskBins bins;
  std::optional<double> operating_threshold;
  nlohmann::json provenance = nlohmann::json::object();
};

nlohmann::json to_json(const BinsFile& f);
BinsFile bins_from_json(const nlohmann::json& j);
void save_bins(const std::filesystem::path& path, const BinsFile& f);
BinsFile load_bins(const std::filesystem::path& path);

}  // namespace pnf::risk
