// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "atdc/error.hpp"
#include "atdc/image.hpp"
#include "test_util.hpp"

using namespace atdc;

namespace {

// Written by an independent encoder (Pillow, optimize=True): 3x2 RGB.
const std::vector<std::uint8_t> kRgbPng = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00,
    0x00, 0x00, 0x03, 0x00, 0x00, 0x00, 0x02, 0x08, 0x02, 0x00, 0x00, 0x00, 0x12, 0x16, 0xf1, 0x4d, 0x00,
    0x00, 0x00, 0x1c, 0x49, 0x44, 0x41, 0x54, 0x78, 0xda, 0x63, 0xf8, 0xcf, 0xc0, 0xc0, 0xf0, 0x9f, 0x81,
    0x81, 0xe1, 0x3f, 0x13, 0xb7, 0x88, 0x5c, 0x43, 0x63, 0xc3, 0xff, 0xff, 0x0c, 0x00, 0x3b, 0x50, 0x06,
    0xbc, 0x72, 0xe1, 0xa4, 0x22, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

// 2x1 gray + alpha: (0, 255), (200, 17).
const std::vector<std::uint8_t> kGrayAlphaPng = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x04, 0x00, 0x00, 0x00, 0x5e, 0x2b, 0xb7, 0x01, 0x00, 0x00, 0x00,
    0x0d, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x60, 0xf8, 0x7f, 0x42, 0x10, 0x00, 0x04, 0xa3, 0x01, 0xd9,
    0xe9, 0x50, 0x71, 0xed, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

ErrorCode decode_error(std::vector<std::uint8_t> bytes) {
  try {
    decode_image(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("decoded without error");
  return ErrorCode::kInvalidArgument;
}

int byte_at(const Image& img, int y, int x, int c) { return static_cast<int>(std::lround(img.at(y, x, c) * 255.f)); }

}  // namespace

TEST_CASE("decodes an externally written RGB PNG") {
  const Image img = decode_image(kRgbPng);
  REQUIRE(img.height() == 2);
  REQUIRE(img.width() == 3);
  CHECK(byte_at(img, 0, 0, 0) == 255);
  CHECK(byte_at(img, 0, 1, 1) == 255);
  CHECK(byte_at(img, 0, 2, 2) == 255);
  CHECK(byte_at(img, 1, 0, 0) == 10);
  CHECK(byte_at(img, 1, 0, 2) == 30);
  CHECK(byte_at(img, 1, 1, 1) == 128);
  CHECK(byte_at(img, 1, 2, 0) == 255);
}

TEST_CASE("gray + alpha is replicated to RGB and alpha dropped") {
  const Image img = decode_image(kGrayAlphaPng);
  CHECK(img.width() == 2);
  CHECK(byte_at(img, 0, 0, 1) == 0);
  CHECK(byte_at(img, 0, 1, 0) == 200);
  CHECK(byte_at(img, 0, 1, 2) == 200);
}

TEST_CASE("PNG and PPM round-trip quantized images exactly") {
  Rng rng(11);
  const Image img = quantized(test::random_image(rng, 13, 17));
  test::TempDir dir("imagio");
  for (const char* name : {"a.png", "a.ppm", "A.PNG"}) {
    save_image(img, dir / name);
    CHECK(load_image(dir / name) == img);
  }
}

TEST_CASE("quantize rounds half away from zero and clamps") {
  CHECK(quantize(0.f) == 0);
  CHECK(quantize(1.f) == 255);
  CHECK(quantize(0.5f) == 128);
  CHECK(quantize(-0.2f) == 0);
  CHECK(quantize(7.f) == 255);
  CHECK(quantize(100.f / 255.f) == 100);
}

TEST_CASE("encoding is deterministic") {
  Rng rng(12);
  const Image img = test::random_image(rng, 8, 8);
  std::vector<std::uint8_t> s(img.data().size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = quantize(img.data()[i]);
  CHECK(encode_png(8, 8, 3, s) == encode_png(8, 8, 3, s));
  CHECK(encode_ppm(img) == encode_ppm(img));
}

TEST_CASE("gray maps are stored as single-channel PNG") {
  test::TempDir dir("imagio_gray");
  const GrayMap m(2, 2, {0.f, 1.f, 0.5f, 0.25f});
  save_gray(m, dir / "m.png");
  const Image back = load_image(dir / "m.png");
  CHECK(byte_at(back, 0, 1, 0) == 255);
  CHECK(byte_at(back, 1, 0, 2) == 128);
  CHECK(byte_at(back, 1, 1, 1) == 64);
}

TEST_CASE("malformed inputs are rejected with a precise code") {
  auto bad_crc = kRgbPng;
  bad_crc[45] ^= 0xff;
  CHECK(decode_error(bad_crc) == ErrorCode::kCorruptData);
  CHECK(decode_error({kRgbPng.begin(), kRgbPng.begin() + 40}) == ErrorCode::kCorruptData);
  CHECK(decode_error({'G', 'I', 'F', '8'}) == ErrorCode::kUnsupportedFormat);
  const std::string ppm16 = "P6\n1 1\n65535\n\x01\x02\x03\x04\x05\x06";
  CHECK(decode_error({ppm16.begin(), ppm16.end()}) == ErrorCode::kUnsupportedFormat);
  const std::string short_ppm = "P6\n2 2\n255\n\x01\x02";
  CHECK(decode_error({short_ppm.begin(), short_ppm.end()}) == ErrorCode::kCorruptData);
}

TEST_CASE("missing files and unknown extensions") {
  try {
    load_image("/nonexistent/x.png");
    FAIL("expected NotFound");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotFound);
  }
  test::TempDir dir("imagio_ext");
  CHECK_THROWS_AS(save_image(Image(2, 2), dir / "x.bmp"), Error);
}

TEST_CASE("image invariants") {
  CHECK_THROWS_AS(Image(1, 1, std::vector<float>{0.f, 1.5f, 0.f}), Error);
  CHECK_THROWS_AS(Image(0, 3), Error);
  const Image c = Image::clamped(1, 1, {-1.f, 2.f, std::nanf("")});
  CHECK(c.at(0, 0, 0) == 0.f);
  CHECK(c.at(0, 0, 1) == 1.f);
  CHECK(c.at(0, 0, 2) == 0.f);
  const Image img(3, 4, std::array<float, 3>{0.1f, 0.2f, 0.3f});
  const Image part = img.crop(1, 1, 2, 3);
  CHECK(part.height() == 2);
  CHECK(part.at(1, 2, 2) == 0.3f);
  CHECK_THROWS_AS(img.crop(2, 0, 2, 1), Error);
}

TEST_CASE("channel means use every pixel") {
  std::vector<float> d;
  for (int i = 0; i < 4; ++i) d.insert(d.end(), {0.25f * i, 1.f, 0.f});
  const ColorStats s = channel_means(Image(2, 2, d));
  CHECK(s.mu[0] == doctest::Approx(0.375));
  CHECK(s.mu[1] == 1.0);
}
