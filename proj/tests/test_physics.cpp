// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "atdc/error.hpp"
#include "atdc/physics.hpp"
#include "test_util.hpp"

using namespace atdc;

namespace {

// Straightforward reference: min over channels, then over the clipped window
// (clipping equals edge replication for a min filter).
GrayMap naive_dark(const Image& img, int patch) {
  const int r = patch / 2, h = img.height(), w = img.width();
  std::vector<float> out;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float m = 1.f;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int yy = std::clamp(y + dy, 0, h - 1), xx = std::clamp(x + dx, 0, w - 1);
          for (int c = 0; c < 3; ++c) m = std::min(m, img.at(yy, xx, c));
        }
      out.push_back(m);
    }
  }
  return GrayMap(h, w, out);
}

const WaterParams kWater{{1.2, 0.6, 0.3}, {0.3, 0.7, 0.8}};

}  // namespace

TEST_CASE("transmission is exp(-beta d) per channel") {
  const DepthMap depth(1, 3, {0.f, 1.f, 2.5f});
  const TransmissionMap t = transmission_from_depth(kWater, depth);
  for (int x = 0; x < 3; ++x)
    for (int c = 0; c < 3; ++c) CHECK(t.at(0, x, c) == doctest::Approx(std::exp(-kWater.beta[c] * depth.at(0, x))));
  CHECK(t.min_value() == doctest::Approx(std::exp(-1.2 * 2.5)));
}

TEST_CASE("degrade is the convex combination J T + A (1 - T)") {
  Rng rng(1);
  const Image j = test::random_image(rng, 4, 5);
  const TransmissionMap t = transmission_from_depth(kWater, make_depth(DepthKind::kRadial, 4, 5, 2.0, 0));
  const Image i = degrade(j, kWater, t);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) {
        const double tt = t.at(y, x, c);
        CHECK(i.at(y, x, c) == doctest::Approx(j.at(y, x, c) * tt + kWater.airlight[c] * (1 - tt)).epsilon(1e-6));
      }
}

TEST_CASE("limits: T = 1 is identity, T = 0 is pure airlight") {
  Rng rng(2);
  const Image j = test::random_image(rng, 3, 3);
  CHECK(degrade(j, kWater, TransmissionMap::constant(3, 3, 1.f)) == j);
  const Image fog = degrade(j, kWater, TransmissionMap::constant(3, 3, 0.f));
  CHECK(fog.at(2, 1, 0) == doctest::Approx(0.3));
  CHECK(fog.at(0, 0, 2) == doctest::Approx(0.8));
}

TEST_CASE("invert undoes degrade where T >= 0.1") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Image j = test::random_image(rng, 8, 8);
    const TransmissionMap t = transmission_from_depth(kWater, make_depth(DepthKind::kNoise, 8, 8, 1.5, trial));
    REQUIRE(t.min_value() >= 0.1f);
    const Image back = invert(degrade(j, kWater, t), kWater, t);
    for (std::size_t k = 0; k < j.data().size(); ++k) CHECK(std::abs(back.data()[k] - j.data()[k]) < 1e-5);
  }
}

TEST_CASE("invert floors the transmission") {
  const Image obs(1, 1, std::vector<float>{0.5f, 0.5f, 0.5f});
  const Image out = invert(obs, kWater, TransmissionMap::constant(1, 1, 0.01f));
  // Green: (0.5 - 0.7 * 0.99) / 0.1 < 0, clamped.
  CHECK(out.at(0, 0, 1) == 0.f);
  const Image blue =
      invert(Image(1, 1, std::vector<float>{0.f, 0.f, 0.82f}), kWater, TransmissionMap::constant(1, 1, 0.01f));
  CHECK(blue.at(0, 0, 2) == doctest::Approx((0.82 - 0.8 * 0.99) / 0.1).epsilon(1e-6));
}

TEST_CASE("airlight-only observations invert to the airlight") {
  const Image obs(4, 4, std::array<float, 3>{static_cast<float>(kWater.airlight[0]),
                                             static_cast<float>(kWater.airlight[1]),
                                             static_cast<float>(kWater.airlight[2])});
  for (float t : {0.1f, 0.4f, 0.9f}) {
    const Image j = invert(obs, kWater, TransmissionMap::constant(4, 4, t));
    for (int c = 0; c < 3; ++c) CHECK(j.at(2, 1, c) == doctest::Approx(kWater.airlight[c]).epsilon(1e-6));
  }
}

TEST_CASE("dark channel matches a direct window minimum") {
  Rng rng(4);
  const Image img = test::random_image(rng, 9, 12);
  for (int patch : {1, 3, 7, 15}) CHECK(dark_channel(img, patch) == naive_dark(img, patch));
  CHECK_THROWS_AS(dark_channel(img, 4), Error);
}

TEST_CASE("airlight is the colour of the brightest dark-channel pixels") {
  std::vector<float> d(100 * 10 * 3, 0.2f);
  const std::size_t p = (37 * 10 + 4) * 3;
  d[p] = 0.9f;
  d[p + 1] = 0.8f;
  d[p + 2] = 0.7f;
  const auto a = estimate_airlight(Image(100, 10, d), 1);
  CHECK(a[0] == doctest::Approx(0.9));
  CHECK(a[1] == doctest::Approx(0.8));
  CHECK(a[2] == doctest::Approx(0.7));
}

TEST_CASE("RMT of a constant image is white") {
  const GrayMap m = estimate_rmt(Image(20, 20, std::array<float, 3>{0.6f, 0.4f, 0.7f}));
  for (float v : m.data()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("RMT ignores a duplicated border row") {
  Rng rng(12);
  const Image img = test::random_image(rng, 14, 11);
  std::vector<float> d(img.data().begin(), img.data().begin() + 11 * 3);
  d.insert(d.end(), img.data().begin(), img.data().end());
  const GrayMap base = estimate_rmt(img, 5), padded = estimate_rmt(Image(15, 11, d), 5);
  CHECK(padded.crop(1, 0, 14, 11) == base);
}

TEST_CASE("RMT with patch 1 is zero at a black pixel") {
  std::vector<float> d(10 * 10 * 3, 0.5f);
  std::fill_n(d.begin() + (5 * 10 + 5) * 3, 3, 0.f);
  const GrayMap m = estimate_rmt(Image(10, 10, d), 1);
  CHECK(m.at(5, 5) == 0.f);
  CHECK(m.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("RMT grows with depth on a ramp scene") {
  Rng rng(5);
  const Image j = test::random_image(rng, 48, 48, 0.0, 1.0);
  const TransmissionMap t = transmission_from_depth(kWater, make_depth(DepthKind::kRamp, 48, 48, 3.0, 0));
  const GrayMap m = estimate_rmt(degrade(j, kWater, t));
  double near = 0, far = 0;
  for (int y = 0; y < 48; ++y)
    for (int x = 0; x < 24; ++x) {
      near += m.at(y, x);
      far += m.at(y, 47 - x);
    }
  CHECK(far > near);
}

TEST_CASE("depth generators") {
  const DepthMap ramp = make_depth(DepthKind::kRamp, 3, 5, 2.0, 0);
  CHECK(ramp.at(1, 0) == 0.f);
  CHECK(ramp.at(1, 4) == doctest::Approx(2.0));
  for (int x = 1; x < 5; ++x) CHECK(ramp.at(2, x) > ramp.at(2, x - 1));

  const DepthMap radial = make_depth(DepthKind::kRadial, 5, 5, 1.0, 0);
  CHECK(radial.at(2, 2) == 0.f);
  CHECK(radial.at(0, 0) == doctest::Approx(1.0));

  const DepthMap a = make_depth(DepthKind::kNoise, 16, 16, 3.0, 9);
  const DepthMap b = make_depth(DepthKind::kNoise, 16, 16, 3.0, 9);
  const DepthMap c = make_depth(DepthKind::kNoise, 16, 16, 3.0, 10);
  CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  CHECK_FALSE(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
  for (float v : a.data()) {
    CHECK(v >= 0.f);
    CHECK(v <= 3.f);
  }
  CHECK_THROWS_AS(make_depth(DepthKind::kRamp, 2, 2, 0.0, 0), Error);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS_AS((WaterParams{{0.0, 0.1, 0.1}, {0.5, 0.5, 0.5}}).validate(), Error);
  CHECK_THROWS_AS((WaterParams{{0.1, 0.1, 0.1}, {0.5, 1.5, 0.5}}).validate(), Error);
  CHECK_NOTHROW(kWater.validate());
  CHECK(parse_depth_kind("radial") == DepthKind::kRadial);
  CHECK(depth_kind_name(DepthKind::kNoise) == "noise");
  CHECK_THROWS_AS(parse_depth_kind("flat"), Error);
}
