// Copyright 2026 The pnf Authors
// SPDX-License-Identifier: Apache-2.0

#include "pnf/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pnf {

Raster8 read_png_gray(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw LoadError("cannot read PNG '" + path.string() + "': " + image.message);
  image.format = PNG_FORMAT_GRAY;
  Raster8 out(static_cast<int>(image.height), static_cast<int>(image.width));
  if (!png_image_finish_read(&image, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw LoadError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  return out;
}

namespace {

void write_png(const std::filesystem::path& path, int rows, int cols, png_uint_32 format,
               const std::uint8_t* data) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(cols);
  image.height = static_cast<png_uint_32>(rows);
  image.format = format;
  if (!png_image_write_to_file(&image, path.c_str(), 0, data, 0, nullptr))
    throw Error("cannot write PNG '" + path.string() + "': " + image.message);
}

}  // namespace

void write_png_gray(const std::filesystem::path& path, const Raster8& img) {
  write_png(path, img.rows, img.cols, PNG_FORMAT_GRAY, img.data.data());
}

void write_png_rgb(const std::filesystem::path& path, const RgbImage& img) {
  write_png(path, img.rows, img.cols, PNG_FORMAT_RGB, img.rgb.data());
}

Raster8 quantize(const Image& img) {
  Raster8 out(img.rows, img.cols);
  std::transform(img.data.begin(), img.data.end(), out.data.begin(), [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  });
  return out;
}

Image to_unit(const Raster8& raw) {
  Image out(raw.rows, raw.cols);
  std::transform(raw.data.begin(), raw.data.end(), out.data.begin(),
                 [](std::uint8_t v) { return static_cast<float>(v / 255.0); });
  return out;
}

}  // namespace pnf
