// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Paired (degraded, clean) image sets: seeded synthetic scenes pushed through
// the scattering model, or two matching directories on disk.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "atdc/image.hpp"
#include "atdc/physics.hpp"
#include "atdc/rng.hpp"

namespace atdc {

/// Sampling ranges for per-scene water. Blue is always attenuated least and
/// the airlight is biased toward blue-green.
struct WaterRange {
  double beta_lo = 0.2, beta_hi = 2.0;
  double airlight_lo = 0.4, airlight_hi = 0.9;
  double depth_lo = 1.0, depth_hi = 3.0;  // range of the per-scene d_max, metres

  /// InvalidRange unless 0 < lo <= hi (airlight within [0,1]).
  void validate() const;
};

/// Everything needed to regenerate a scene's degradation.
struct SceneRecord {
  std::string name;
  WaterParams water;
  DepthKind depth_kind = DepthKind::kRamp;
  double d_max = 1.0;
  std::uint64_t depth_seed = 0;

  TransmissionMap transmission(int height, int width) const;
};

struct ScenePair {
  std::string name;
  Image degraded;
  Image clean;
  std::optional<SceneRecord> scene;  // present for synthetic pairs
};

struct PairedDataset {
  std::vector<ScenePair> pairs;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// Draws water, depth kind and depth scale for one scene. A fixed kind, if
/// given, replaces the random choice.
SceneRecord sample_scene(Rng& rng, std::string name, const WaterRange& range,
                         std::optional<DepthKind> kind = std::nullopt);

/// Applies the record's water and depth to a clean image.
Image render_degraded(const Image& clean, const SceneRecord& scene);

/// Smooth multi-octave colour field with a few flat geometric shapes on top.
Image make_clean_scene(Rng& rng, int height, int width);

/// count scenes of size x size named scene_0000, scene_0001, ... Scene i
/// depends only on (seed, i). InvalidRange for count < 1, size < 16 or a bad
/// range.
PairedDataset make_synthetic_dataset(std::uint64_t seed, int count, int size, const WaterRange& range = {},
                                     std::optional<DepthKind> kind = std::nullopt);

struct NamedImage {
  std::string name;  // file name, including extension
  Image image;
};

/// Every .png / .ppm file in a directory, sorted by file name.
std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir);

/// dir/degraded and dir/clean with identical file names. NotFound when a
/// counterpart is missing, DatasetEmpty when there are no pairs.
PairedDataset load_paired_dir(const std::filesystem::path& dir);

/// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng);

}  // namespace atdc
