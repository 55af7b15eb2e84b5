// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "png.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <cstring>
#include <string>

#include "atdc/error.hpp"

namespace atdc::png {
namespace {

constexpr std::array<std::uint8_t, 8> kSignature = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::uint32_t read_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, std::span<const std::uint8_t> payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t type_at = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  const uLong crc = crc32(0L, out.data() + type_at, static_cast<uInt>(4 + payload.size()));
  put_be32(out, static_cast<std::uint32_t>(crc));
}

int channels_for(int color_type) {
  switch (color_type) {
    case 0: return 1;
    case 2: return 3;
    case 4: return 2;
    case 6: return 4;
    default: return 0;
  }
}

std::uint8_t paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return static_cast<std::uint8_t>(a);
  if (pb <= pc) return static_cast<std::uint8_t>(b);
  return static_cast<std::uint8_t>(c);
}

std::vector<std::uint8_t> inflate_exact(const std::vector<std::uint8_t>& compressed, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) fail(ErrorCode::kCorruptData, "png: zlib init failed");
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) fail(ErrorCode::kCorruptData, "png: truncated or malformed image data");
  return out;
}

}  // namespace

bool has_signature(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= kSignature.size() && std::memcmp(bytes.data(), kSignature.data(), kSignature.size()) == 0;
}

Decoded decode(std::span<const std::uint8_t> bytes) {
  if (!has_signature(bytes)) fail(ErrorCode::kUnsupportedFormat, "png: bad signature");
  std::size_t pos = kSignature.size();
  Decoded img;
  int color_type = -1;
  bool seen_header = false;
  bool seen_end = false;
  std::vector<std::uint8_t> idat;

  while (!seen_end) {
    if (bytes.size() - pos < 12) fail(ErrorCode::kCorruptData, "png: truncated chunk header");
    const std::uint32_t length = read_be32(bytes.data() + pos);
    const std::uint8_t* type = bytes.data() + pos + 4;
    if (length > bytes.size() - pos - 12) fail(ErrorCode::kCorruptData, "png: truncated chunk");
    const std::uint8_t* payload = type + 4;
    const std::uint32_t stored_crc = read_be32(payload + length);
    if (crc32(0L, type, length + 4) != stored_crc) fail(ErrorCode::kCorruptData, "png: chunk crc mismatch");
    const std::string name(reinterpret_cast<const char*>(type), 4);

    if (name == "IHDR") {
      if (length != 13) fail(ErrorCode::kCorruptData, "png: bad IHDR");
      img.width = static_cast<int>(read_be32(payload));
      img.height = static_cast<int>(read_be32(payload + 4));
      const int bit_depth = payload[8];
      color_type = payload[9];
      const int interlace = payload[12];
      if (img.width <= 0 || img.height <= 0 || img.width > (1 << 16) || img.height > (1 << 16))
        fail(ErrorCode::kCorruptData, "png: bad dimensions");
      if (bit_depth != 8) fail(ErrorCode::kUnsupportedFormat, "png: only 8-bit samples are supported");
      img.channels = channels_for(color_type);
      if (img.channels == 0) fail(ErrorCode::kUnsupportedFormat, "png: palette or unknown color type");
      if (payload[10] != 0 || payload[11] != 0) fail(ErrorCode::kUnsupportedFormat, "png: unknown compression/filter method");
      if (interlace != 0) fail(ErrorCode::kUnsupportedFormat, "png: interlaced images are not supported");
      seen_header = true;
    } else if (name == "IDAT") {
      if (!seen_header) fail(ErrorCode::kCorruptData, "png: IDAT before IHDR");
      idat.insert(idat.end(), payload, payload + length);
    } else if (name == "IEND") {
      seen_end = true;
    } else if (name == "PLTE") {
      // Allowed (suggested palette) for truecolor; palette images were rejected at IHDR.
    } else if ((type[0] & 0x20) == 0) {
      fail(ErrorCode::kUnsupportedFormat, "png: unknown critical chunk " + name);
    }
    pos += 12 + length;
  }
  if (!seen_header || idat.empty()) fail(ErrorCode::kCorruptData, "png: missing IHDR or IDAT");

  const std::size_t stride = static_cast<std::size_t>(img.width) * img.channels;
  const std::vector<std::uint8_t> raw = inflate_exact(idat, (stride + 1) * img.height);
  img.samples.assign(stride * img.height, 0);
  const int bpp = img.channels;
  for (int y = 0; y < img.height; ++y) {
    const std::uint8_t filter = raw[y * (stride + 1)];
    const std::uint8_t* src = raw.data() + y * (stride + 1) + 1;
    std::uint8_t* row = img.samples.data() + y * stride;
    const std::uint8_t* prev = y > 0 ? row - stride : nullptr;
    for (std::size_t i = 0; i < stride; ++i) {
      const int a = i >= static_cast<std::size_t>(bpp) ? row[i - bpp] : 0;
      const int b = prev ? prev[i] : 0;
      const int c = (prev && i >= static_cast<std::size_t>(bpp)) ? prev[i - bpp] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += a; break;
        case 2: v += b; break;
        case 3: v += (a + b) / 2; break;
        case 4: v += paeth(a, b, c); break;
        default: fail(ErrorCode::kCorruptData, "png: bad filter type");
      }
      row[i] = static_cast<std::uint8_t>(v & 0xff);
    }
  }
  return img;
}

std::vector<std::uint8_t> encode(int height, int width, int channels, std::span<const std::uint8_t> samples) {
  int color_type = 0;
  switch (channels) {
    case 1: color_type = 0; break;
    case 2: color_type = 4; break;
    case 3: color_type = 2; break;
    case 4: color_type = 6; break;
    default: fail(ErrorCode::kInvalidArgument, "png: unsupported channel count");
  }
  const std::size_t stride = static_cast<std::size_t>(width) * channels;
  require(samples.size() == stride * height, ErrorCode::kShapeMismatch, "png: sample count does not match dimensions");

  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    raw.insert(raw.end(), samples.begin() + y * stride, samples.begin() + (y + 1) * stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
    fail(ErrorCode::kIoFailure, "png: deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_be32(ihdr, static_cast<std::uint32_t>(width));
  put_be32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, static_cast<std::uint8_t>(color_type), 0, 0, 0});
  put_chunk(out, "IHDR", ihdr);
  put_chunk(out, "IDAT", compressed);
  put_chunk(out, "IEND", {});
  return out;
}

}  // namespace atdc::png
