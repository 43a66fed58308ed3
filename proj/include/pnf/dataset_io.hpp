// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string_view>

#include "pnf/core_data.hpp"

namespace pnf {

/// Manifest header, in column order.
inline constexpr std::string_view kManifestHeader =
    "subject_id,core_id,grade_group,involvement_pct,age_years,psa_ng_ml,psad,family_history,"
    "reference_score,image_path,mask_path";

inline constexpr std::string_view kManifestName = "manifest.csv";

/// Loads a manifest (a file, or a directory containing manifest.csv). Image
/// and mask paths are relative to the manifest. Images that are not 256x256
/// are resampled. Throws LoadError naming the offending row.
Dataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes manifest.csv, images/<core_id>.png and masks/<core_id>.png under
/// `dir`. Involvement is written as a percentage that divides back to the
/// stored fraction exactly.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);

/// Plain-decimal percentage whose exact decimal value, divided by 100 and
/// rounded once, is `fraction`.
std::string involvement_to_pct(double fraction);
/// Inverse of involvement_to_pct.
double pct_to_involvement(std::string_view pct);

}  // namespace pnf
