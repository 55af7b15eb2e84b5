// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/physics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "atdc/error.hpp"
#include "atdc/rng.hpp"

namespace atdc {
namespace {

void check_same_dims(int h0, int w0, int h1, int w1, const char* what) {
  require(h0 == h1 && w0 == w1, ErrorCode::kShapeMismatch,
          std::string(what) + ": " + std::to_string(h0) + "x" + std::to_string(w0) + " vs " + std::to_string(h1) +
              "x" + std::to_string(w1));
}

// Separable window minimum with edge replication.
std::vector<float> window_min(std::vector<float> field, int height, int width, int patch) {
  const int r = patch / 2;
  std::vector<float> tmp(field.size());
  for (int y = 0; y < height; ++y) {
    const float* row = field.data() + static_cast<std::size_t>(y) * width;
    for (int x = 0; x < width; ++x) {
      float m = row[x];
      for (int d = -r; d <= r; ++d) m = std::min(m, row[std::clamp(x + d, 0, width - 1)]);
      tmp[static_cast<std::size_t>(y) * width + x] = m;
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      float m = tmp[static_cast<std::size_t>(y) * width + x];
      for (int d = -r; d <= r; ++d) m = std::min(m, tmp[static_cast<std::size_t>(std::clamp(y + d, 0, height - 1)) * width + x]);
      field[static_cast<std::size_t>(y) * width + x] = m;
    }
  }
  return field;
}

void check_patch(int patch) {
  require(patch >= 1 && patch % 2 == 1, ErrorCode::kInvalidArgument, "patch size must be odd and >= 1");
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

}  // namespace

void WaterParams::validate() const {
  for (int c = 0; c < 3; ++c) {
    require(std::isfinite(beta[c]) && beta[c] > 0.0, ErrorCode::kInvalidArgument, "attenuation beta must be > 0");
    require(airlight[c] >= 0.0 && airlight[c] <= 1.0, ErrorCode::kInvalidArgument, "airlight must lie in [0,1]");
  }
}

DepthMap::DepthMap(int height, int width, std::vector<float> meters)
    : height_(height), width_(width), data_(std::move(meters)) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "depth map dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width, ErrorCode::kShapeMismatch,
          "depth map length must be H*W");
  for (float d : data_) require(std::isfinite(d) && d >= 0.f, ErrorCode::kInvalidArgument, "depth must be finite and >= 0");
}

TransmissionMap::TransmissionMap(int height, int width, std::vector<float> data)
    : height_(height), width_(width), data_(std::move(data)) {
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "transmission dimensions must be positive");
  require(data_.size() == static_cast<std::size_t>(height) * width * 3, ErrorCode::kShapeMismatch,
          "transmission length must be H*W*3");
  for (float t : data_) require(t >= 0.f && t <= 1.f, ErrorCode::kInvalidArgument, "transmission must lie in [0,1]");
}

TransmissionMap TransmissionMap::constant(int height, int width, float t) {
  return TransmissionMap(height, width, std::vector<float>(static_cast<std::size_t>(height) * width * 3, t));
}

float TransmissionMap::min_value() const { return *std::min_element(data_.begin(), data_.end()); }

std::string_view depth_kind_name(DepthKind kind) {
  switch (kind) {
    case DepthKind::kRamp: return "ramp";
    case DepthKind::kRadial: return "radial";
    case DepthKind::kNoise: return "noise";
  }
  return "ramp";
}

DepthKind parse_depth_kind(std::string_view name) {
  if (name == "ramp") return DepthKind::kRamp;
  if (name == "radial") return DepthKind::kRadial;
  if (name == "noise") return DepthKind::kNoise;
  fail(ErrorCode::kInvalidArgument, "unknown depth kind '" + std::string(name) + "'");
}

TransmissionMap transmission_from_depth(const WaterParams& params, const DepthMap& depth) {
  params.validate();
  std::vector<float> t(static_cast<std::size_t>(depth.height()) * depth.width() * 3);
  for (std::size_t i = 0; i < depth.data().size(); ++i) {
    for (int c = 0; c < 3; ++c) t[i * 3 + c] = static_cast<float>(std::exp(-params.beta[c] * depth.data()[i]));
  }
  return TransmissionMap(depth.height(), depth.width(), std::move(t));
}

Image degrade(const Image& clean, const WaterParams& params, const TransmissionMap& t) {
  check_same_dims(clean.height(), clean.width(), t.height(), t.width(), "degrade");
  params.validate();
  std::vector<float> out(clean.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double tc = t.data()[i];
    const double a = params.airlight[i % 3];
    out[i] = static_cast<float>(clean.data()[i] * tc + a * (1.0 - tc));
  }
  return Image::clamped(clean.height(), clean.width(), std::move(out));
}

Image invert(const Image& observed, const WaterParams& params, const TransmissionMap& t, double t_floor) {
  check_same_dims(observed.height(), observed.width(), t.height(), t.width(), "invert");
  params.validate();
  require(t_floor > 0.0 && t_floor < 1.0, ErrorCode::kInvalidArgument, "t_floor must lie in (0,1)");
  std::vector<float> out(observed.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double tc = t.data()[i];
    const double a = params.airlight[i % 3];
    out[i] = static_cast<float>((observed.data()[i] - a * (1.0 - tc)) / std::max(tc, t_floor));
  }
  return Image::clamped(observed.height(), observed.width(), std::move(out));
}

GrayMap dark_channel(const Image& img, int patch) {
  check_patch(patch);
  std::vector<float> m(img.pixels());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const float* px = img.data().data() + i * 3;
    m[i] = std::min({px[0], px[1], px[2]});
  }
  return GrayMap(img.height(), img.width(), window_min(std::move(m), img.height(), img.width(), patch));
}

std::array<double, 3> estimate_airlight(const Image& img, int patch, double fraction) {
  require(fraction > 0.0 && fraction <= 0.5, ErrorCode::kInvalidArgument, "airlight fraction must lie in (0, 0.5]");
  const GrayMap dark = dark_channel(img, patch);
  const std::size_t n = img.pixels();
  const std::size_t take = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n))));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto d = dark.data();
  // Brightest dark-channel first; ties resolved by raster order.
  std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take - 1), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] != d[b] ? d[a] > d[b] : a < b; });
  std::array<double, 3> a{};
  for (std::size_t k = 0; k < take; ++k) {
    for (int c = 0; c < 3; ++c) a[c] += img.data()[order[k] * 3 + c];
  }
  for (double& v : a) v /= static_cast<double>(take);
  return a;
}

GrayMap estimate_rmt(const Image& img, int patch) {
  check_patch(patch);
  const std::array<double, 3> a = estimate_airlight(img, patch, kDefaultAirlightFraction);
  std::vector<float> ratio(img.pixels());
  for (std::size_t i = 0; i < ratio.size(); ++i) {
    double m = 1e30;
    for (int c = 0; c < 3; ++c) m = std::min(m, img.data()[i * 3 + c] / std::max(a[c], kAirlightFloor));
    ratio[i] = static_cast<float>(m);
  }
  std::vector<float> dark = window_min(std::move(ratio), img.height(), img.width(), patch);
  // Transmission estimate is 1 - dark, so the reverse map is the normalised
  // dark channel itself.
  for (float& v : dark) v = std::clamp(v, 0.f, 1.f);
  return GrayMap(img.height(), img.width(), std::move(dark));
}

DepthMap make_depth(DepthKind kind, int height, int width, double d_max, std::uint64_t seed) {
  require(d_max > 0.0 && std::isfinite(d_max), ErrorCode::kInvalidArgument, "d_max must be > 0");
  require(height >= 1 && width >= 1, ErrorCode::kInvalidArgument, "depth map dimensions must be positive");
  std::vector<float> d(static_cast<std::size_t>(height) * width);
  switch (kind) {
    case DepthKind::kRamp:
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          d[static_cast<std::size_t>(y) * width + x] =
              width > 1 ? static_cast<float>(d_max * x / (width - 1)) : 0.f;
        }
      }
      break;
    case DepthKind::kRadial: {
      const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
      const double rmax = std::hypot(cy, cx);
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double r = std::hypot(y - cy, x - cx);
          d[static_cast<std::size_t>(y) * width + x] = rmax > 0 ? static_cast<float>(d_max * r / rmax) : 0.f;
        }
      }
      break;
    }
    case DepthKind::kNoise: {
      // Two octaves of lattice value noise, then min-max normalised.
      Rng rng(seed);
      std::vector<double> acc(d.size(), 0.0);
      double amplitude = 1.0;
      for (int cells : {3, 6}) {
        const int gh = cells + 2, gw = cells + 2;
        std::vector<double> lattice(static_cast<std::size_t>(gh) * gw);
        for (double& v : lattice) v = rng.uniform();
        for (int y = 0; y < height; ++y) {
          const double fy = (height > 1 ? static_cast<double>(y) / (height - 1) : 0.0) * cells;
          const int iy = std::min(static_cast<int>(fy), cells);
          const double ty = smoothstep(fy - iy);
          for (int x = 0; x < width; ++x) {
            const double fx = (width > 1 ? static_cast<double>(x) / (width - 1) : 0.0) * cells;
            const int ix = std::min(static_cast<int>(fx), cells);
            const double tx = smoothstep(fx - ix);
            const auto at = [&](int yy, int xx) { return lattice[static_cast<std::size_t>(yy) * gw + xx]; };
            const double top = at(iy, ix) * (1 - tx) + at(iy, ix + 1) * tx;
            const double bottom = at(iy + 1, ix) * (1 - tx) + at(iy + 1, ix + 1) * tx;
            acc[static_cast<std::size_t>(y) * width + x] += amplitude * (top * (1 - ty) + bottom * ty);
          }
        }
        amplitude *= 0.5;
      }
      const auto [lo, hi] = std::minmax_element(acc.begin(), acc.end());
      const double span = *hi - *lo;
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] = span > 0 ? static_cast<float>(d_max * (acc[i] - *lo) / span) : 0.f;
      }
      break;
    }
  }
  return DepthMap(height, width, std::move(d));
}

}  // namespace atdc
