// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

// Shared fixtures for the unit tests.

#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "pnf/core_data.hpp"

namespace pnf::test {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pnf") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

/// Vertical needle band of the given width centred in a square image.
inline Mask band_mask(int size, int col0, int width, int row0, int rows) {
  Mask m(size, size, 0);
  for (int r = row0; r < row0 + rows; ++r)
    for (int c = col0; c < col0 + width; ++c) m(r, c) = 1;
  return m;
}

/// Random image in [0,1].
inline Image random_image(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(size, size);
  for (auto& v : img.data) v = u(rng);
  return img;
}

/// Hand-built core with a fixed 4-pixel-wide band.
inline BiopsyCore make_core(const std::string& id, const std::string& subject, int gg, double involvement,
                            int size = kImageSize, float fill = 0.5f) {
  BiopsyCore c;
  c.core_id = id;
  c.subject_id = subject;
  c.image = Image(size, size, fill);
  c.needle_mask = band_mask(size, size / 2 - 2, 4, size / 4, size / 2);
  c.grade_group = gg;
  c.involvement = involvement;
  return c;
}

inline Subject make_subject(const std::string& id, double age, double psa, std::vector<std::string> cores) {
  Subject s;
  s.subject_id = id;
  s.age = age;
  s.psa = psa;
  s.cores = std::move(cores);
  return s;
}

}  // namespace pnf::test
