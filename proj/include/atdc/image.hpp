// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Raster types and file I/O. Everything numeric downstream consumes these.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace atdc {

/// Row-major H x W x 3 RGB raster with every sample in [0, 1].
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  /// Constant image.
  Image(int height, int width, std::array<float, 3> rgb = {0.f, 0.f, 0.f});
  /// Validates shape and range; throws InvalidArgument on violation.
  Image(int height, int width, std::vector<float> data);

  /// Clamps every sample into [0, 1] instead of rejecting. NaN becomes 0.
  static Image clamped(int height, int width, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  float at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  std::span<const float> data() const { return data_; }

  Image crop(int y0, int x0, int h, int w) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Single-channel H x W field in [0, 1] (RMT maps, dark channels).
class GrayMap {
 public:
  GrayMap() = default;
  GrayMap(int height, int width, float fill = 0.f);
  GrayMap(int height, int width, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  float at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> data() const { return data_; }

  GrayMap crop(int y0, int x0, int h, int w) const;

  friend bool operator==(const GrayMap&, const GrayMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

struct ColorStats {
  std::array<double, 3> mu{};
};

/// Per-channel arithmetic mean with compensated summation.
ColorStats channel_means(const Image& img);

/// 8-bit PNG (RGB, RGBA, gray, gray+alpha; non-interlaced) or binary P6 PPM.
Image load_image(const std::filesystem::path& path);
/// Format chosen by extension: .png or .ppm.
void save_image(const Image& img, const std::filesystem::path& path);
/// Writes a single-channel 8-bit PNG.
void save_gray(const GrayMap& map, const std::filesystem::path& path);

/// round(v * 255) with halves away from zero, clamped to [0, 255].
std::uint8_t quantize(float v);
/// Snaps every sample to the 1/255 grid exactly as save_image would.
Image quantized(const Image& img);

// In-memory codecs; the file functions above are thin wrappers.
Image decode_image(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(int height, int width, int channels, std::span<const std::uint8_t> samples);
std::vector<std::uint8_t> encode_ppm(const Image& img);

}  // namespace atdc
