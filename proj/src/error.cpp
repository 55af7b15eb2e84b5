// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/error.hpp"

namespace atdc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNotFound: return "NotFound";
    case ErrorCode::kUnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::kCorruptData: return "CorruptData";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kDegenerateBatch: return "DegenerateBatch";
    case ErrorCode::kNotScalar: return "NotScalar";
    case ErrorCode::kDetachedGraph: return "DetachedGraph";
    case ErrorCode::kInvalidLayer: return "InvalidLayer";
    case ErrorCode::kTooSmall: return "TooSmall";
    case ErrorCode::kInvalidRange: return "InvalidRange";
    case ErrorCode::kMissingBranchInput: return "MissingBranchInput";
    case ErrorCode::kDatasetEmpty: return "DatasetEmpty";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kConfigMismatch: return "ConfigMismatch";
  }
  return "Unknown";
}

}  // namespace atdc
