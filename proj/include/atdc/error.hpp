// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace atdc {

enum class ErrorCode {
  kInvalidArgument,
  kNotFound,
  kUnsupportedFormat,
  kCorruptData,
  kIoFailure,
  kShapeMismatch,
  kDegenerateBatch,
  kNotScalar,
  kDetachedGraph,
  kInvalidLayer,
  kTooSmall,
  kInvalidRange,
  kMissingBranchInput,
  kDatasetEmpty,
  kNonFiniteLoss,
  kChecksumMismatch,
  kVersionUnsupported,
  kConfigMismatch,
};

std::string_view error_code_name(ErrorCode code);

// All library failures surface as an Error carrying a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace atdc
