// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Underwater image formation I = J*T + A*(1 - T) with T = exp(-beta * d), and
// a dark-channel estimator of the reverse transmission map used to seed the
// network's transmission branch.

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "atdc/image.hpp"

namespace atdc {

struct WaterParams {
  std::array<double, 3> beta{};     // attenuation per channel, 1/m, > 0
  std::array<double, 3> airlight{};  // background light per channel, [0, 1]

  void validate() const;
};

class DepthMap {
 public:
  DepthMap() = default;
  DepthMap(int height, int width, std::vector<float> meters);

  int height() const { return height_; }
  int width() const { return width_; }
  float at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  std::span<const float> data() const { return data_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// Per-channel transmission, H x W x 3 in [0, 1].
class TransmissionMap {
 public:
  TransmissionMap() = default;
  TransmissionMap(int height, int width, std::vector<float> data);
  static TransmissionMap constant(int height, int width, float t);

  int height() const { return height_; }
  int width() const { return width_; }
  float at(int y, int x, int c) const { return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c]; }
  std::span<const float> data() const { return data_; }
  float min_value() const;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

enum class DepthKind { kRamp, kRadial, kNoise };

std::string_view depth_kind_name(DepthKind kind);
/// Parses "ramp", "radial" or "noise"; InvalidArgument otherwise.
DepthKind parse_depth_kind(std::string_view name);

inline constexpr double kDefaultTransmissionFloor = 0.1;
inline constexpr int kDefaultRmtPatch = 15;
inline constexpr double kDefaultAirlightFraction = 0.001;
inline constexpr double kAirlightFloor = 0.1;

TransmissionMap transmission_from_depth(const WaterParams& params, const DepthMap& depth);

/// Forward scattering model, clamped to [0, 1].
Image degrade(const Image& clean, const WaterParams& params, const TransmissionMap& t);

/// Inverse model with the transmission floored at t_floor, clamped to [0, 1].
Image invert(const Image& observed, const WaterParams& params, const TransmissionMap& t,
             double t_floor = kDefaultTransmissionFloor);

/// min over channels, then min over a patch x patch window with edge replication.
GrayMap dark_channel(const Image& img, int patch);

/// Background light: average colour of the brightest `fraction` of the dark channel.
std::array<double, 3> estimate_airlight(const Image& img, int patch = kDefaultRmtPatch,
                                        double fraction = kDefaultAirlightFraction);

/// Reverse medium transmission 1 - T from the dark-channel prior; large where
/// the scene is hazy.
GrayMap estimate_rmt(const Image& img, int patch = kDefaultRmtPatch);

/// Synthetic depth in [0, d_max]: ramp grows left to right, radial grows from
/// the centre, noise is a seeded smooth value-noise field.
DepthMap make_depth(DepthKind kind, int height, int width, double d_max, std::uint64_t seed);

}  // namespace atdc
