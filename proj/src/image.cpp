// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "atdc/error.hpp"
#include "fileio.hpp"
#include "png.hpp"

namespace atdc {
namespace {

void check_dims(int height, int width) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "image dimensions must be positive");
}

void check_range(std::span<const float> data) {
  for (float v : data) {
    if (!(v >= 0.f && v <= 1.f)) fail(ErrorCode::kInvalidArgument, "image sample outside [0,1]");
  }
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

// Header tokens are separated by whitespace and may carry '#' comments.
class PpmHeader {
 public:
  explicit PpmHeader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space();
    if (pos_ >= bytes_.size()) fail(ErrorCode::kCorruptData, "ppm: truncated header");
    if (!std::isdigit(bytes_[pos_])) fail(ErrorCode::kCorruptData, "ppm: malformed header");
    long v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (v > (1 << 20)) fail(ErrorCode::kCorruptData, "ppm: header value out of range");
    }
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_offset() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail(ErrorCode::kCorruptData, "ppm: truncated header");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 2;
};

Image decode_ppm(std::span<const std::uint8_t> bytes) {
  PpmHeader header(bytes);
  const int width = header.next_int();
  const int height = header.next_int();
  const int maxval = header.next_int();
  if (width < 1 || height < 1) fail(ErrorCode::kCorruptData, "ppm: bad dimensions");
  if (maxval != 255) fail(ErrorCode::kUnsupportedFormat, "ppm: only maxval 255 is supported");
  const std::size_t offset = header.raster_offset();
  const std::size_t count = static_cast<std::size_t>(width) * height * 3;
  if (bytes.size() < offset + count) fail(ErrorCode::kCorruptData, "ppm: truncated raster");
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) data[i] = static_cast<float>(bytes[offset + i]) / 255.f;
  return Image(height, width, std::move(data));
}

}  // namespace

Image::Image(int height, int width, std::array<float, 3> rgb) : height_(height), width_(width) {
  check_dims(height, width);
  check_range(rgb);
  data_.resize(pixels() * 3);
  for (std::size_t i = 0; i < pixels(); ++i) std::copy(rgb.begin(), rgb.end(), data_.begin() + i * 3);
}

Image::Image(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_dims(height, width);
  require(data_.size() == pixels() * 3, ErrorCode::kShapeMismatch, "image data length must be H*W*3");
  check_range(data_);
}

Image Image::clamped(int height, int width, std::vector<float> data) {
  for (float& v : data) v = std::isnan(v) ? 0.f : std::clamp(v, 0.f, 1.f);
  return Image(height, width, std::move(data));
}

Image Image::crop(int y0, int x0, int h, int w) const {
  require(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= height_ && x0 + w <= width_,
          ErrorCode::kInvalidArgument, "crop window outside image");
  std::vector<float> out(static_cast<std::size_t>(h) * w * 3);
  for (int y = 0; y < h; ++y) {
    const auto src = data_.begin() + ((static_cast<std::size_t>(y0 + y) * width_) + x0) * 3;
    std::copy(src, src + static_cast<std::ptrdiff_t>(w) * 3, out.begin() + static_cast<std::ptrdiff_t>(y) * w * 3);
  }
  return Image(h, w, std::move(out));
}

GrayMap::GrayMap(int height, int width, float fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(std::max(height, 0)) * std::max(width, 0), fill) {
  check_dims(height, width);
  check_range(std::span<const float>(&fill, 1));
}

GrayMap::GrayMap(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  check_dims(height, width);
  require(data_.size() == static_cast<std::size_t>(height) * width, ErrorCode::kShapeMismatch,
          "gray map data length must be H*W");
  check_range(data_);
}

GrayMap GrayMap::crop(int y0, int x0, int h, int w) const {
  require(y0 >= 0 && x0 >= 0 && h >= 1 && w >= 1 && y0 + h <= height_ && x0 + w <= width_,
          ErrorCode::kInvalidArgument, "crop window outside map");
  std::vector<float> out(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    const auto src = data_.begin() + static_cast<std::size_t>(y0 + y) * width_ + x0;
    std::copy(src, src + w, out.begin() + static_cast<std::ptrdiff_t>(y) * w);
  }
  return GrayMap(h, w, std::move(out));
}

ColorStats channel_means(const Image& img) {
  // Neumaier summation per channel.
  std::array<double, 3> sum{}, comp{};
  const auto data = img.data();
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = data[i * 3 + c];
      const double t = sum[c] + v;
      if (std::abs(sum[c]) >= std::abs(v)) {
        comp[c] += (sum[c] - t) + v;
      } else {
        comp[c] += (v - t) + sum[c];
      }
      sum[c] = t;
    }
  }
  ColorStats stats;
  for (int c = 0; c < 3; ++c) stats.mu[c] = (sum[c] + comp[c]) / static_cast<double>(img.pixels());
  return stats;
}

std::uint8_t quantize(float v) {
  const double scaled = std::round(static_cast<double>(v) * 255.0);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

Image quantized(const Image& img) {
  std::vector<float> out(img.data().size());
  std::transform(img.data().begin(), img.data().end(), out.begin(),
                 [](float v) { return static_cast<float>(quantize(v)) / 255.f; });
  return Image(img.height(), img.width(), std::move(out));
}

Image decode_image(std::span<const std::uint8_t> bytes) {
  if (png::has_signature(bytes)) {
    png::Decoded d = png::decode(bytes);
    std::vector<float> data(static_cast<std::size_t>(d.height) * d.width * 3);
    const bool gray = d.channels <= 2;
    for (std::size_t i = 0; i < static_cast<std::size_t>(d.height) * d.width; ++i) {
      const std::uint8_t* px = d.samples.data() + i * d.channels;
      for (int c = 0; c < 3; ++c) data[i * 3 + c] = static_cast<float>(gray ? px[0] : px[c]) / 255.f;
    }
    return Image(d.height, d.width, std::move(data));
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
  fail(ErrorCode::kUnsupportedFormat, "unrecognized magic bytes");
}

std::vector<std::uint8_t> encode_ppm(const Image& img) {
  const std::string header = "P6\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.data().size());
  for (float v : img.data()) out.push_back(quantize(v));
  return out;
}

std::vector<std::uint8_t> encode_png(int height, int width, int channels, std::span<const std::uint8_t> samples) {
  return png::encode(height, width, channels, samples);
}

Image load_image(const std::filesystem::path& path) { return decode_image(io::read_file(path)); }

void save_image(const Image& img, const std::filesystem::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".ppm") {
    io::write_file(path, encode_ppm(img));
  } else if (ext == ".png") {
    std::vector<std::uint8_t> samples(img.data().size());
    std::transform(img.data().begin(), img.data().end(), samples.begin(), quantize);
    io::write_file(path, encode_png(img.height(), img.width(), 3, samples));
  } else {
    fail(ErrorCode::kUnsupportedFormat, "unknown image extension: " + path.string());
  }
}

void save_gray(const GrayMap& map, const std::filesystem::path& path) {
  require(lower_ext(path) == ".png", ErrorCode::kUnsupportedFormat, "gray maps are written as .png");
  std::vector<std::uint8_t> samples(map.data().size());
  std::transform(map.data().begin(), map.data().end(), samples.begin(), quantize);
  io::write_file(path, encode_png(map.height(), map.width(), 1, samples));
}

}  // namespace atdc
