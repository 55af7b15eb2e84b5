// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "atdc/tensor.hpp"

namespace atdc {

struct AdamOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::vector<Tensor<T>> m;  // first moments, one per parameter
  std::vector<Tensor<T>> v;  // second moments
};

/// One bias-corrected Adam update using each parameter's accumulated grad.
/// An empty state is initialized to zeros on first use. Parameters without a
/// gradient buffer are skipped. ShapeMismatch when state and params disagree.
template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, const AdamOptions& opts);

}  // namespace atdc
