// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable layer vocabulary. Feature maps are [N, C, H, W].

#pragma once

#include <vector>

#include "atdc/tensor.hpp"

namespace atdc {

/// Cross-correlation with an odd square kernel and zero padding k/2.
/// weight [Cout, Cin, k, k], bias [Cout]. With stride 1 the spatial size is
/// preserved; stride 2 halves it (rounding up).
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride = 1);

enum class NormMode { kTrain, kEval };

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

template <typename T>
struct BatchNormState {
  Tensor<T> running_mean;  // [C], starts at 0
  Tensor<T> running_var;   // [C], starts at 1

  explicit BatchNormState(std::int64_t channels = 0);
};

/// Train mode normalizes with biased batch statistics and folds the unbiased
/// variance into the running estimate; eval mode uses the running estimate.
template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, NormMode mode);

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope);

/// Output clamped to the open interval (0, 1) in the working precision.
template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x);

/// x [N, Din], weight [Dout, Din], bias [Dout] -> [N, Dout].
template <typename T>
Tensor<T> fully_connected(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// [N, C, H, W] -> [N, C].
template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x);

/// Concatenation along axis 1 for rank-2 or rank-4 tensors.
template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& xs);

// Pointwise binary ops. y either matches x's shape or, for x of rank 4,
// is [N, C] (broadcast over H, W) or [N, 1, H, W] (broadcast over C).
template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y);

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& x, T offset);

/// Gradient passes where lo <= x <= hi and is zero outside.
template <typename T>
Tensor<T> clamp(Tape<T>& tape, const Tensor<T>& x, T lo, T hi);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);
template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

namespace testing {
/// Scales every conv2d weight gradient by (1 + 1e-2). Negative control for
/// the gradient checker; never enable outside tests.
void set_conv_grad_corruption(bool on);
}  // namespace testing

}  // namespace atdc
