// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "pnf/core_data.hpp"

namespace pnf {

struct RgbImage {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> rgb;  // interleaved, row-major

  RgbImage() = default;
  RgbImage(int r, int c) : rows(r), cols(c), rgb(static_cast<std::size_t>(r) * c * 3, 0) {}
  std::uint8_t* at(int r, int c) { return &rgb[(static_cast<std::size_t>(r) * cols + c) * 3]; }
};

/// Reads any PNG as 8-bit grayscale. Throws LoadError.
Raster8 read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const Raster8& img);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& img);

/// round(v * 255)
Raster8 quantize(const Image& img);
Image to_unit(const Raster8& raw);

}  // namespace pnf
