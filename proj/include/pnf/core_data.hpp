// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pnf/error.hpp"

namespace pnf {

inline constexpr int kImageSize = 256;

/// Dense row-major 2-D array.
template <typename T>
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  T& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  const T& operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  bool operator==(const Grid&) const = default;
};

/// Grayscale image with values in [0,1].
using Image = Grid<float>;
/// 8-bit raster (raw images, binary masks stored as 0/1).
using Raster8 = Grid<std::uint8_t>;
using Mask = Grid<std::uint8_t>;

std::size_t count_set(const Mask& mask);

// ---------------------------------------------------------------------------
// Domain types

struct BiopsyCore {
  std::string core_id;
  std::string subject_id;
  Image image;
  Mask needle_mask;
  int grade_group = 0;
  double involvement = 0.0;  // fraction in [0,1]
  std::optional<int> reference_score;

  /// Throws InvalidInput naming the core when an invariant is broken.
  void validate() const;
};

struct Subject {
  std::string subject_id;
  double age = 0.0;
  double psa = 0.0;
  std::optional<double> psad;
  std::optional<bool> family_history;
  std::vector<std::string> cores;

  void validate() const;
};

enum class Category { benign = 0, isPCa = 1, csPCa = 2 };

std::string_view to_string(Category c);

struct CoreLabels {
  bool is_cspca = false;
  bool is_pca = false;
  Category category = Category::benign;
  bool operator==(const CoreLabels&) const = default;
};

/// Clinical markers usable as prompts.
enum class Marker { age, psa, psad };

std::string_view to_string(Marker m);
Marker parse_marker(std::string_view name);
/// Parses "age,psa" style lists; "none" or "" yields the empty set.
std::vector<Marker> parse_marker_list(std::string_view list);
std::string format_marker_list(std::span<const Marker> markers);

/// Marker value of a subject, or nullopt when not recorded.
std::optional<double> marker_value(const Subject& s, Marker m);

struct MarkerStats {
  struct Moments {
    double mean = 0.0;
    double std = 1.0;
  };
  std::map<Marker, Moments> moments;

  /// Fits mean/std of each marker over subjects that have it. Throws
  /// ConfigError if a marker has no values or zero spread.
  static MarkerStats fit(std::span<const Subject> subjects, std::span<const Marker> markers);
};

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of;

  std::vector<std::string> subjects_in(int fold) const;
  std::vector<std::string> subjects_outside(int fold) const;
};

/// The full labelled corpus.
struct Dataset {
  std::vector<Subject> subjects;
  std::vector<BiopsyCore> cores;

  const Subject& subject(std::string_view id) const;
  std::vector<std::string> subject_ids() const;
  /// Indices of cores whose subject is in `ids`, in corpus order.
  std::vector<std::size_t> cores_of(std::span<const std::string> ids) const;
  /// Cross-checks subject/core references and every invariant.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Operations

/// Resizes an 8-bit image to 256x256 with half-pixel-centre bilinear
/// sampling and scales by 1/255.
Image preprocess_image(const Raster8& raw, int out_size = kImageSize);
/// Floating-point source: clamps to [0,1] before resizing.
Image preprocess_image(const Image& raw, int out_size = kImageSize);
/// Nearest-neighbour resize for binary masks.
Mask resize_mask(const Mask& mask, int out_size = kImageSize);

/// (value - mean) / std. Missing value -> MissingMarker; marker not in
/// `stats` -> ConfigError.
double normalize_marker(std::optional<double> value, const MarkerStats& stats, Marker marker);

CoreLabels grade_to_labels(int grade_group);

/// Most clinically significant category over the cores.
Category subject_diagnosis(std::span<const CoreLabels> cores);

/// Seeded shuffle, then round-robin deal into k folds.
FoldAssignment make_folds(std::span<const std::string> subject_ids, int k, std::uint64_t seed);

/// Throws SubjectLeakage if any validation core belongs to a training subject.
void assert_disjoint(const Dataset& ds, std::span<const std::size_t> train_cores,
                     std::span<const std::size_t> val_cores);

}  // namespace pnf
