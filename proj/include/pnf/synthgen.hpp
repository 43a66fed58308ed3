// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pnf/core_data.hpp"

namespace pnf::synth {

/// Controls for the synthetic micro-ultrasound-like corpus.
struct GenConfig {
  int n_subjects = 100;
  int cores_per_subject = 8;
  double lesion_prevalence = 0.3;  // P(core carries cancer)
  double texture_contrast = 2.0;   // lesion log-intensity shift, in units of kLogShiftPerContrast
  double metadata_signal = 0.5;    // coupling of PSA/age to subject burden
  std::uint64_t seed = 0;

  // Correlation between subject burden and each core's cancer latent.
  double burden_coupling = 0.8;
  // Standardised-severity cut points mapping cancer cores to GG 1..5.
  std::array<double, 4> grade_cuts{-1.036, 0.0, 0.674, 1.2816};
  int image_size = kImageSize;

  void validate() const;
};

struct LesionSpec {
  double cx = 128, cy = 128;  // centre (col, row) in pixels
  double rx = 20, ry = 40;    // semi-axes along the rotated x/y axes
  double angle = 0.0;         // radians
  double contrast = 0.0;      // multiples of kLogShiftPerContrast
};

struct NeedleSpec {
  double cx = 128, cy = 128;  // centre of the trace
  double length = 102;        // ~40% of image height
  double width = 6;           // >= 3
  double angle = 0.0;         // radians from vertical
};

/// Log-intensity speckle parameters.
inline constexpr double kLogMean = -1.6;
inline constexpr double kLogStd = 0.3;
/// Mean log-intensity shift inside a lesion per unit of contrast.
inline constexpr double kLogShiftPerContrast = 0.25;
/// Relative increase of log-intensity spread per unit of contrast.
inline constexpr double kLogSpreadPerContrast = 0.1;

struct RenderedCore {
  Image image;
  Mask needle_mask;
  Mask lesion_mask;
};

/// Renders one B-mode-like frame: smoothed log-normal speckle, with the
/// lesion region's log-intensity shifted by contrast * kLogShiftPerContrast.
RenderedCore render_core(std::uint64_t background_seed, const std::optional<LesionSpec>& lesion,
                         const NeedleSpec& needle, int image_size = kImageSize);

/// |needle ∩ lesion| / |needle|.
double oracle_involvement(const Mask& needle_mask, const Mask& lesion_mask);

struct CoreTruth {
  std::string core_id;
  int grade_group = 0;
  double lesion_strength = 0.0;  // per-lesion multiplier of texture_contrast
  double severity = 0.0;
  Mask lesion_mask;
};

struct GroundTruth {
  std::vector<CoreTruth> cores;                 // corpus order
  std::map<std::string, double> subject_burden;  // latent per subject
};

struct Generated {
  Dataset dataset;
  GroundTruth truth;
};

Generated generate_dataset(const GenConfig& cfg);

/// Dataset files plus ground_truth/{lesions/*.png, cores.csv, subjects.csv}.
void save_generated(const Generated& gen, const std::filesystem::path& dir);

}  // namespace pnf::synth
