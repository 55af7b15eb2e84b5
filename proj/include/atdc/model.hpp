// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// The enhancement network: an encoder-decoder backbone (EDC) with channel
// attention and multi-stage fusion, a transmission branch (ATM) refining the
// dark-channel RMT map, and a colour branch (DCM) mapping per-channel input
// means to output gains.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "atdc/image.hpp"
#include "atdc/ops.hpp"
#include "atdc/tensor.hpp"

namespace atdc {

struct ModelConfig {
  int base_channels = 64;
  int encoder_blocks = 3;
  int decoder_blocks = 3;
  bool use_ca = true;
  bool use_fusion = true;
  bool use_atm = true;
  bool use_dcm = true;
  double leaky_slope = 0.2;
  int ca_reduction = 16;
  int atm_channels = 64;
  int dcm_hidden = 16;

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;
  /// Flat "key=value" lines, one per field, in a fixed order.
  std::string descriptor() const;
  static ModelConfig from_descriptor(std::string_view text);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename T>
struct ConvParams {
  Tensor<T> weight;  // [Cout, Cin, k, k]
  Tensor<T> bias;    // [Cout]
};

template <typename T>
struct LinearParams {
  Tensor<T> weight;  // [Dout, Din]
  Tensor<T> bias;    // [Dout]
};

template <typename T>
struct NormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  BatchNormState<T> stats;
};

template <typename T>
struct ResidualBlockParams {
  ConvParams<T> conv1;
  NormParams<T> bn1;
  ConvParams<T> conv2;
  NormParams<T> bn2;
  std::optional<ConvParams<T>> proj;  // 1x1, present iff Cin != Cout
};

template <typename T>
struct ChannelAttentionParams {
  LinearParams<T> fc1;  // C -> C / reduction
  LinearParams<T> fc2;  // C / reduction -> C
};

template <typename T>
struct EdcParams {
  ConvParams<T> stem;
  std::vector<ResidualBlockParams<T>> enc;
  // With fusion: attention for F1 and F3. Without fusion: one, for the last
  // encoder stage. Empty when attention is off.
  std::vector<ChannelAttentionParams<T>> ca;
  std::optional<ConvParams<T>> fuse;
  std::vector<ResidualBlockParams<T>> dec;
  ConvParams<T> head;
};

template <typename T>
struct AtmParams {
  std::vector<ResidualBlockParams<T>> rb;  // widths atm_channels, atm_channels, 1
};

template <typename T>
struct DcmParams {
  std::vector<LinearParams<T>> fc;  // 3 -> h, (3+h) -> h, (3+2h) -> 3
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
struct ModelParams {
  ModelConfig config;
  EdcParams<T> edc;
  std::optional<AtmParams<T>> atm;
  std::optional<DcmParams<T>> dcm;

  // Handles share storage with the model (shallow, like shared_ptr), so
  // writing through them updates the weights.

  /// Trainable tensors in a fixed order.
  std::vector<NamedTensor<T>> parameters() const;
  /// Batch-norm running statistics, same ordering guarantee.
  std::vector<NamedTensor<T>> buffers() const;
  /// Deep copy (handles in the result do not alias this model).
  ModelParams clone() const;
};

template <typename T>
struct ForwardTrace {
  Tensor<T> f1, f2, f3;            // encoder stage features
  Tensor<T> f_hat1, f_hat3;        // attention-refined stages (undefined when unused)
  Tensor<T> decoder_input;         // after fusion and transmission gating
  Tensor<T> rmt_refined;           // [N,1,H,W] in (0,1), undefined without ATM
  Tensor<T> coeffs;                // [N,3] in (0,2), undefined without DCM
  Tensor<T> output0;               // sigmoid head, (0,1)
  Tensor<T> output;                // final enhanced image tensor, [0,1]
};

template <typename T>
ModelParams<T> init_params(std::uint64_t seed, const ModelConfig& config);

/// act(bn(conv(act(bn(conv(x)))))) + proj(x).
template <typename T>
Tensor<T> residual_block(Tape<T>& tape, const Tensor<T>& x, ResidualBlockParams<T>& p, NormMode mode, T slope);

/// Squeeze-excite gating: f * sigmoid(fc2(act(fc1(pool(f))))).
template <typename T>
Tensor<T> channel_attention(Tape<T>& tape, const Tensor<T>& f, const ChannelAttentionParams<T>& p, T slope);

/// means [N,3] -> gains [N,3] in (0,2).
template <typename T>
Tensor<T> dcm_forward(Tape<T>& tape, const Tensor<T>& means, const DcmParams<T>& p, T slope);

/// rmt [N,1,H,W] -> refined map [N,1,H,W] in (0,1).
template <typename T>
Tensor<T> atm_forward(Tape<T>& tape, const Tensor<T>& rmt, AtmParams<T>& p, NormMode mode, T slope);

/// Backbone with optional transmission gating and colour gains. Pass undefined
/// tensors for branches the config disables; MissingBranchInput otherwise.
template <typename T>
ForwardTrace<T> edc_forward(Tape<T>& tape, const Tensor<T>& image, const Tensor<T>& rmt_refined,
                            const Tensor<T>& coeffs, EdcParams<T>& p, const ModelConfig& config, NormMode mode);

/// Whole network on prepared batch inputs: image [N,3,H,W], rmt [N,1,H,W]
/// (ignored without ATM), means [N,3] (ignored without DCM).
template <typename T>
ForwardTrace<T> network_forward(Tape<T>& tape, ModelParams<T>& params, const Tensor<T>& image,
                                const Tensor<T>& rmt, const Tensor<T>& means, NormMode mode);

/// Inference on one image: computes means and the RMT prior itself, runs in
/// eval mode, returns the enhanced image and the trace.
std::pair<Image, ForwardTrace<float>> model_forward(const Image& img, ModelParams<float>& params,
                                                    int rmt_patch = 15);

// Layout conversions between rasters and [N, C, H, W] tensors.
template <typename T>
Tensor<T> images_to_tensor(const std::vector<Image>& images);
template <typename T>
Tensor<T> graymaps_to_tensor(const std::vector<GrayMap>& maps);
template <typename T>
Tensor<T> means_to_tensor(const std::vector<Image>& images);
/// Sample n of a [N,3,H,W] tensor, clamped into [0,1].
template <typename T>
Image tensor_to_image(const Tensor<T>& t, std::int64_t n = 0);

/// Converts a whole model between precisions.
template <typename To, typename From>
ModelParams<To> cast_params(const ModelParams<From>& src);

}  // namespace atdc
