// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/core_data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "pnf/resample.hpp"

namespace pnf {

std::size_t count_set(const Mask& mask) {
  return static_cast<std::size_t>(std::count_if(mask.data.begin(), mask.data.end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

void BiopsyCore::validate() const {
  auto fail = [&](const std::string& what) {
    throw InvalidInput("core '" + core_id + "': " + what);
  };
  if (core_id.empty()) throw InvalidInput("core with empty core_id");
  if (subject_id.empty()) fail("empty subject_id");
  if (image.empty()) fail("empty image");
  if (image.rows != needle_mask.rows || image.cols != needle_mask.cols)
    fail("image and needle mask shapes differ");
  if (count_set(needle_mask) == 0) fail("needle mask has no set pixel (needs >= 1)");
  if (grade_group < 0 || grade_group > 5)
    fail("grade_group " + std::to_string(grade_group) + " outside 0..5");
  if (!(involvement >= 0.0 && involvement <= 1.0)) fail("involvement outside [0,1]");
  if ((involvement == 0.0) != (grade_group == 0))
    fail("involvement must be 0 exactly when grade_group is 0");
  for (float v : image.data)
    if (!(v >= 0.0f && v <= 1.0f)) fail("image value outside [0,1]");
  if (reference_score && (*reference_score < 1 || *reference_score > 5))
    fail("reference_score outside 1..5");
}

void Subject::validate() const {
  auto fail = [&](const std::string& what) {
    throw InvalidInput("subject '" + subject_id + "': " + what);
  };
  if (subject_id.empty()) throw InvalidInput("subject with empty subject_id");
  if (cores.empty()) fail("no cores");
  if (!(age > 0.0)) fail("age must be positive");
  if (!(psa >= 0.0)) fail("psa must be non-negative");
  if (psad && !(*psad >= 0.0)) fail("psad must be non-negative");
}

std::string_view to_string(Category c) {
  switch (c) {
    case Category::benign: return "benign";
    case Category::isPCa: return "isPCa";
    case Category::csPCa: return "csPCa";
  }
  return "?";
}

std::string_view to_string(Marker m) {
  switch (m) {
    case Marker::age: return "age";
    case Marker::psa: return "psa";
    case Marker::psad: return "psad";
  }
  return "?";
}

Marker parse_marker(std::string_view name) {
  if (name == "age") return Marker::age;
  if (name == "psa") return Marker::psa;
  if (name == "psad") return Marker::psad;
  throw ConfigError("unknown marker '" + std::string(name) + "' (expected age, psa or psad)");
}

std::vector<Marker> parse_marker_list(std::string_view list) {
  std::vector<Marker> out;
  if (list.empty() || list == "none") return out;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t end = list.find_first_of(",+", start);
    if (end == std::string_view::npos) end = list.size();
    Marker m = parse_marker(list.substr(start, end - start));
    if (std::find(out.begin(), out.end(), m) != out.end())
      throw ConfigError("duplicate marker '" + std::string(to_string(m)) + "'");
    out.push_back(m);
    start = end + 1;
  }
  return out;
}

std::string format_marker_list(std::span<const Marker> markers) {
  if (markers.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < markers.size(); ++i) {
    if (i) out += ',';
    out += to_string(markers[i]);
  }
  return out;
}

std::optional<double> marker_value(const Subject& s, Marker m) {
  switch (m) {
    case Marker::age: return s.age;
    case Marker::psa: return s.psa;
    case Marker::psad: return s.psad;
  }
  return std::nullopt;
}

MarkerStats MarkerStats::fit(std::span<const Subject> subjects, std::span<const Marker> markers) {
  MarkerStats stats;
  for (Marker m : markers) {
    std::vector<double> values;
    for (const auto& s : subjects)
      if (auto v = marker_value(s, m)) values.push_back(*v);
    if (values.size() < 2)
      throw ConfigError("marker '" + std::string(to_string(m)) + "' has fewer than 2 values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    if (!(sd > 0.0))
      throw ConfigError("marker '" + std::string(to_string(m)) + "' has zero spread");
    stats.moments[m] = {mean, sd};
  }
  return stats;
}

std::vector<std::string> FoldAssignment::subjects_in(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f == fold) out.push_back(id);
  return out;
}

std::vector<std::string> FoldAssignment::subjects_outside(int fold) const {
  std::vector<std::string> out;
  for (const auto& [id, f] : fold_of)
    if (f != fold) out.push_back(id);
  return out;
}

const Subject& Dataset::subject(std::string_view id) const {
  auto it = std::find_if(subjects.begin(), subjects.end(),
                         [&](const Subject& s) { return s.subject_id == id; });
  if (it == subjects.end()) throw InvalidInput("unknown subject '" + std::string(id) + "'");
  return *it;
}

std::vector<std::string> Dataset::subject_ids() const {
  std::vector<std::string> ids;
  ids.reserve(subjects.size());
  for (const auto& s : subjects) ids.push_back(s.subject_id);
  return ids;
}

std::vector<std::size_t> Dataset::cores_of(std::span<const std::string> ids) const {
  std::set<std::string_view> wanted(ids.begin(), ids.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cores.size(); ++i)
    if (wanted.count(cores[i].subject_id)) out.push_back(i);
  return out;
}

void Dataset::validate() const {
  std::set<std::string> subject_set;
  for (const auto& s : subjects) {
    s.validate();
    if (!subject_set.insert(s.subject_id).second)
      throw InvalidInput("duplicate subject '" + s.subject_id + "'");
  }
  std::set<std::string> core_set;
  for (const auto& c : cores) {
    c.validate();
    if (!core_set.insert(c.core_id).second)
      throw InvalidInput("duplicate core '" + c.core_id + "'");
    if (!subject_set.count(c.subject_id))
      throw InvalidInput("core '" + c.core_id + "' references unknown subject '" + c.subject_id + "'");
  }
  for (const auto& s : subjects)
    for (const auto& id : s.cores)
      if (!core_set.count(id))
        throw InvalidInput("subject '" + s.subject_id + "' lists unknown core '" + id + "'");
}

// ---------------------------------------------------------------------------

std::vector<LinearTap> linear_taps(int in, int out) {
  if (in < 1 || out < 1) throw InvalidInput("linear_taps: sizes must be positive");
  std::vector<LinearTap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double x = (o + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(in - 1));
    const int lo = static_cast<int>(std::floor(x));
    const int hi = std::min(lo + 1, in - 1);
    const double frac = x - lo;
    taps[o] = {lo, hi, 1.0 - frac, frac};
  }
  return taps;
}

namespace {

template <typename Src, typename Fn>
Image bilinear_resize(const Grid<Src>& src, int out_size, Fn to_unit) {
  const auto row_taps = linear_taps(src.rows, out_size);
  const auto col_taps = linear_taps(src.cols, out_size);
  // Horizontal pass, then vertical.
  std::vector<double> tmp(static_cast<std::size_t>(src.rows) * out_size);
  for (int r = 0; r < src.rows; ++r)
    for (int c = 0; c < out_size; ++c) {
      const auto& t = col_taps[c];
      tmp[static_cast<std::size_t>(r) * out_size + c] =
          t.w_lo * to_unit(src(r, t.lo)) + t.w_hi * to_unit(src(r, t.hi));
    }
  Image out(out_size, out_size);
  for (int r = 0; r < out_size; ++r) {
    const auto& t = row_taps[r];
    for (int c = 0; c < out_size; ++c) {
      const double v = t.w_lo * tmp[static_cast<std::size_t>(t.lo) * out_size + c] +
                       t.w_hi * tmp[static_cast<std::size_t>(t.hi) * out_size + c];
      out(r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

template <typename T>
void check_raster(const Grid<T>& g) {
  if (g.rows < 2 || g.cols < 2 || g.size() != static_cast<std::size_t>(g.rows) * g.cols)
    throw InvalidInput("preprocess_image: expected a 2-D image of at least 2x2");
}

}  // namespace

Image preprocess_image(const Raster8& raw, int out_size) {
  check_raster(raw);
  return bilinear_resize(raw, out_size, [](std::uint8_t v) { return v / 255.0; });
}

Image preprocess_image(const Image& raw, int out_size) {
  check_raster(raw);
  return bilinear_resize(raw, out_size, [](float v) {
    return std::isfinite(v) ? std::clamp(static_cast<double>(v), 0.0, 1.0) : 0.0;
  });
}

Mask resize_mask(const Mask& mask, int out_size) {
  check_raster(mask);
  Mask out(out_size, out_size);
  auto nearest = [](int o, int in, int n) {
    return std::min(static_cast<int>(std::floor((o + 0.5) * in / n)), in - 1);
  };
  for (int r = 0; r < out_size; ++r)
    for (int c = 0; c < out_size; ++c)
      out(r, c) = mask(nearest(r, mask.rows, out_size), nearest(c, mask.cols, out_size)) ? 1 : 0;
  return out;
}

double normalize_marker(std::optional<double> value, const MarkerStats& stats, Marker marker) {
  auto it = stats.moments.find(marker);
  if (it == stats.moments.end())
    throw ConfigError("no normalisation statistics for marker '" + std::string(to_string(marker)) + "'");
  if (!value || !std::isfinite(*value))
    throw MissingMarker("missing value for marker '" + std::string(to_string(marker)) + "'");
  return (*value - it->second.mean) / it->second.std;
}

CoreLabels grade_to_labels(int gg) {
  if (gg < 0 || gg > 5) throw InvalidInput("grade group " + std::to_string(gg) + " outside 0..5");
  CoreLabels l;
  l.is_cspca = gg >= 3;
  l.is_pca = gg >= 2;
  l.category = gg >= 3 ? Category::csPCa : (gg >= 1 ? Category::isPCa : Category::benign);
  return l;
}

Category subject_diagnosis(std::span<const CoreLabels> cores) {
  if (cores.empty()) throw InvalidInput("subject_diagnosis: no cores");
  Category worst = Category::benign;
  for (const auto& c : cores) worst = std::max(worst, c.category);
  return worst;
}

FoldAssignment make_folds(std::span<const std::string> subject_ids, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidInput("make_folds: k must be >= 2");
  if (static_cast<std::size_t>(k) > subject_ids.size())
    throw InvalidInput("make_folds: k=" + std::to_string(k) + " exceeds subject count " +
                       std::to_string(subject_ids.size()));
  std::vector<std::string> order(subject_ids.begin(), subject_ids.end());
  if (std::set<std::string>(order.begin(), order.end()).size() != order.size())
    throw InvalidInput("make_folds: duplicate subject ids");
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  FoldAssignment fa;
  fa.k = k;
  for (std::size_t i = 0; i < order.size(); ++i) fa.fold_of[order[i]] = static_cast<int>(i % k);
  return fa;
}

void assert_disjoint(const Dataset& ds, std::span<const std::size_t> train_cores,
                     std::span<const std::size_t> val_cores) {
  std::set<std::string_view> train_subjects;
  for (auto i : train_cores) train_subjects.insert(ds.cores.at(i).subject_id);
  for (auto i : val_cores) {
    const auto& c = ds.cores.at(i);
    if (train_subjects.count(c.subject_id))
      throw SubjectLeakage("validation core '" + c.core_id + "' belongs to training subject '" +
                           c.subject_id + "'");
  }
}

}  // namespace pnf
