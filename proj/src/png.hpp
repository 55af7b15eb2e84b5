// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace atdc::png {

struct Decoded {
  int height = 0;
  int width = 0;
  int channels = 0;  // 1, 2, 3 or 4
  std::vector<std::uint8_t> samples;
};

bool has_signature(std::span<const std::uint8_t> bytes);
Decoded decode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode(int height, int width, int channels, std::span<const std::uint8_t> samples);

}  // namespace atdc::png
