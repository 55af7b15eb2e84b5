// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "atdc/error.hpp"
#include "atdc/image.hpp"
#include "atdc/rng.hpp"

namespace atdc::test {

// Code carried by the Error thrown from f, or nullopt when nothing is thrown.
template <typename F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

#define CHECK_ERROR_CODE(expr, expected) \
  CHECK(::atdc::test::error_code_of([&] { (void)(expr); }) == std::optional<::atdc::ErrorCode>(expected))

inline Image random_image(Rng& rng, int h, int w, double lo = 0.0, double hi = 1.0) {
  std::vector<float> d(static_cast<std::size_t>(h) * w * 3);
  for (auto& v : d) v = static_cast<float>(rng.uniform(lo, hi));
  return Image(h, w, std::move(d));
}

// Fresh per-process scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("atdc_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace atdc::test
