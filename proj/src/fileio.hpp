// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace atdc::io {

/// Whole file; NotFound when missing or unreadable.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Truncating write; IoFailure on error.
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
/// Writes a temporary sibling, then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace atdc::io
