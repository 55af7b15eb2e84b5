// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Training objective: pixel l2, feature-space l1 and structural similarity,
// combined with fixed weights.

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "atdc/model.hpp"
#include "atdc/tensor.hpp"

namespace atdc {

struct LossWeights {
  double alpha = 1.0;    // l2
  double beta = 0.01;    // perceptual
  double gamma = 100.0;  // ssim

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct ExtractorSpec {
  std::vector<int> channels{16, 32, 64, 64, 64};
  int stride = 2;
  double slope = 0.2;
  std::uint64_t seed = 0x5eed;

  /// "channels=16,32,...;stride=2;slope=0.2;seed=N".
  std::string descriptor() const;
  static ExtractorSpec from_descriptor(std::string_view text);

  friend bool operator==(const ExtractorSpec&, const ExtractorSpec&) = default;
};

/// Frozen stack of conv(3x3, stride) + leaky-relu stages over RGB input.
template <typename T>
class FeatureExtractor {
 public:
  /// Random weights drawn from spec.seed.
  explicit FeatureExtractor(const ExtractorSpec& spec = {});
  /// Externally supplied weights, one conv per stage, e.g. from a checkpoint.
  FeatureExtractor(const ExtractorSpec& spec, std::vector<ConvParams<T>> stages);

  const ExtractorSpec& spec() const { return spec_; }
  int num_layers() const { return static_cast<int>(stages_.size()); }
  int last_layer() const { return num_layers() - 1; }
  const std::vector<ConvParams<T>>& stages() const { return stages_; }

  /// Activations after stage `layer` (0-based). InvalidLayer when out of range.
  Tensor<T> features(Tape<T>& tape, const Tensor<T>& x, int layer) const;

  /// Weights as "phi.stage<k>.weight" / "phi.stage<k>.bias".
  std::vector<NamedTensor<T>> named_tensors() const;
  static FeatureExtractor from_named(const ExtractorSpec& spec, const std::vector<NamedTensor<T>>& tensors);

 private:
  ExtractorSpec spec_;
  std::vector<ConvParams<T>> stages_;
};

/// Mean over the batch of the per-example Euclidean norm of j - j_ref.
template <typename T>
Tensor<T> l2_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref);

/// Batch sum of ||phi_k(j) - phi_k(j_ref)||_1 divided by C_k * H_k * W_k.
template <typename T>
Tensor<T> perceptual_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref,
                          const FeatureExtractor<T>& phi, int layer);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

/// 1 - batch mean of SSIM (Gaussian window, valid region, mean over channels).
template <typename T>
Tensor<T> ssim_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref);

template <typename T>
struct LossTerms {
  Tensor<T> total;
  Tensor<T> l2;
  Tensor<T> perceptual;
  Tensor<T> ssim;
};

/// alpha * l2 + beta * perceptual + gamma * ssim, at the extractor's last layer.
template <typename T>
LossTerms<T> total_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref, const FeatureExtractor<T>& phi,
                        const LossWeights& weights = {});

namespace detail {

/// Mean SSIM over the valid region of one H x W plane pair. When dx/dy are
/// non-null, adds grad_scale * d(mean SSIM)/d(x or y) into them.
double ssim_plane(const double* x, const double* y, int height, int width, double* dx = nullptr,
                  double* dy = nullptr, double grad_scale = 0.0);

}  // namespace detail

}  // namespace atdc
