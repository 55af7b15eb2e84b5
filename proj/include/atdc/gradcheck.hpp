// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Central-difference verification of every differentiable operation.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace atdc {

enum class Precision { kSingle, kDouble };

struct GradcheckOptions {
  std::uint64_t seed = 0;
  Precision precision = Precision::kDouble;
  /// Input coordinates probed per tensor.
  int samples = 12;
};

struct GradcheckResult {
  std::string op;
  double max_rel_error = 0.0;
  int checked = 0;
  /// Coordinates dropped because a kink lies within the difference step.
  int skipped = 0;
  bool passed = false;
};

struct GradcheckReport {
  Precision precision = Precision::kDouble;
  double threshold = 0.0;
  std::vector<GradcheckResult> results;

  bool passed() const;
  /// One "name max_rel_error PASS|FAIL" line per operation.
  std::string str() const;
};

/// 1e-5 in double precision, 1e-3 in single.
double gradcheck_threshold(Precision precision);

GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace atdc
