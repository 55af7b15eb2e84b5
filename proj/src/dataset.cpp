// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "atdc/error.hpp"

namespace atdc {
namespace {

bool is_image_file(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm";
}

void check_range(double lo, double hi, double floor, double ceil, const char* what) {
  require(std::isfinite(lo) && std::isfinite(hi) && lo > floor && lo <= hi && hi <= ceil, ErrorCode::kInvalidRange,
          std::string(what) + " range must satisfy " + std::to_string(floor) + " < lo <= hi <= " +
              std::to_string(ceil));
}

}  // namespace

void WaterRange::validate() const {
  check_range(beta_lo, beta_hi, 0.0, 1e3, "beta");
  check_range(airlight_lo, airlight_hi, 0.0, 1.0, "airlight");
  check_range(depth_lo, depth_hi, 0.0, 1e3, "depth");
}

TransmissionMap SceneRecord::transmission(int height, int width) const {
  return transmission_from_depth(water, make_depth(depth_kind, height, width, d_max, depth_seed));
}

SceneRecord sample_scene(Rng& rng, std::string name, const WaterRange& range, std::optional<DepthKind> kind) {
  range.validate();
  SceneRecord s;
  s.name = std::move(name);
  std::array<double, 3> beta{};
  for (double& b : beta) b = rng.uniform(range.beta_lo, range.beta_hi);
  // Red is attenuated most, blue least.
  std::sort(beta.begin(), beta.end(), std::greater<>());
  s.water.beta = beta;
  std::array<double, 3> a{};
  for (double& v : a) v = rng.uniform(range.airlight_lo, range.airlight_hi);
  std::sort(a.begin(), a.end());
  // Red gets the weakest airlight; green and blue share the rest in random order.
  s.water.airlight = rng.below(2) == 0 ? std::array<double, 3>{a[0], a[1], a[2]} : std::array<double, 3>{a[0], a[2], a[1]};
  const std::uint64_t k = rng.below(3);
  s.depth_kind = kind ? *kind : static_cast<DepthKind>(k);
  s.d_max = rng.uniform(range.depth_lo, range.depth_hi);
  s.depth_seed = rng.next_u64();
  return s;
}

Image render_degraded(const Image& clean, const SceneRecord& scene) {
  return degrade(clean, scene.water, scene.transmission(clean.height(), clean.width()));
}

Image make_clean_scene(Rng& rng, int height, int width) {
  std::vector<float> px(static_cast<std::size_t>(height) * width * 3);
  for (int c = 0; c < 3; ++c) {
    const double lo = rng.uniform(0.0, 0.1), hi = rng.uniform(0.65, 1.0);
    const DepthMap field = make_depth(DepthKind::kNoise, height, width, 1.0, rng.next_u64());
    for (std::size_t i = 0; i < field.data().size(); ++i) {
      px[i * 3 + c] = static_cast<float>(lo + (hi - lo) * field.data()[i]);
    }
  }
  const int shapes = 2 + static_cast<int>(rng.below(4));
  const int extent = std::min(height, width);
  for (int s = 0; s < shapes; ++s) {
    const bool circle = rng.below(2) == 0;
    const double cy = rng.uniform(0.0, height), cx = rng.uniform(0.0, width);
    const double ry = rng.uniform(extent / 10.0, extent / 4.0), rx = circle ? ry : rng.uniform(extent / 10.0, extent / 4.0);
    // Like most natural surfaces, every shape is dark in at least one channel.
    std::array<float, 3> colour{};
    for (float& v : colour) v = static_cast<float>(rng.uniform());
    colour[rng.below(3)] = static_cast<float>(rng.uniform(0.0, 0.1));
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = circle ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] = colour[c];
      }
    }
  }
  // Small shadowed crevices scattered over the whole frame.
  const int specks = std::max(1, height * width / 45);
  for (int s = 0; s < specks; ++s) {
    const int cy = static_cast<int>(rng.below(height)), cx = static_cast<int>(rng.below(width));
    const int r = 1 + static_cast<int>(rng.below(2));
    const float shade = static_cast<float>(rng.uniform(0.0, 0.08));
    for (int y = std::max(0, cy - r + 1); y < std::min(height, cy + r); ++y) {
      for (int x = std::max(0, cx - r + 1); x < std::min(width, cx + r); ++x) {
        for (int c = 0; c < 3; ++c) px[(static_cast<std::size_t>(y) * width + x) * 3 + c] *= shade;
      }
    }
  }
  return Image(height, width, std::move(px));
}

PairedDataset make_synthetic_dataset(std::uint64_t seed, int count, int size, const WaterRange& range,
                                     std::optional<DepthKind> kind) {
  require(count >= 1, ErrorCode::kInvalidRange, "synthetic dataset needs count >= 1");
  require(size >= 16, ErrorCode::kInvalidRange, "synthetic dataset needs size >= 16");
  range.validate();
  PairedDataset ds;
  ds.pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng({seed, static_cast<std::uint64_t>(i)});
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d", i);
    ScenePair p;
    p.name = name;
    p.clean = make_clean_scene(rng, size, size);
    p.scene = sample_scene(rng, p.name, range, kind);
    p.degraded = render_degraded(p.clean, *p.scene);
    ds.pairs.push_back(std::move(p));
  }
  return ds;
}

std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir) {
  require(std::filesystem::is_directory(dir), ErrorCode::kNotFound, "not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) out.push_back({f.filename().string(), load_image(f)});
  return out;
}

PairedDataset load_paired_dir(const std::filesystem::path& dir) {
  const auto degraded = load_image_dir(dir / "degraded");
  const auto clean_dir = dir / "clean";
  require(std::filesystem::is_directory(clean_dir), ErrorCode::kNotFound, "not a directory: " + clean_dir.string());
  PairedDataset ds;
  for (const auto& d : degraded) {
    const auto ref = clean_dir / d.name;
    require(std::filesystem::exists(ref), ErrorCode::kNotFound, "no clean counterpart for " + d.name);
    ScenePair p{d.name, d.image, load_image(ref), std::nullopt};
    require(p.degraded.height() == p.clean.height() && p.degraded.width() == p.clean.width(),
            ErrorCode::kShapeMismatch, "pair " + d.name + " differs in size");
    ds.pairs.push_back(std::move(p));
  }
  require(!ds.empty(), ErrorCode::kDatasetEmpty, "no image pairs under " + dir.string());
  return ds;
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
  return idx;
}

}  // namespace atdc
