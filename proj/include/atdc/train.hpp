// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "atdc/checkpoint.hpp"
#include "atdc/dataset.hpp"
#include "atdc/losses.hpp"
#include "atdc/metrics.hpp"
#include "atdc/model.hpp"

namespace atdc {

struct TrainConfig {
  std::uint64_t seed = 0;
  int epochs = 50;
  int batch_size = 4;
  double learning_rate = 2e-4;
  int crop_size = 64;
  bool flips = true;
  int rmt_patch = kDefaultRmtPatch;
  LossWeights weights;
  ModelConfig model;
  ExtractorSpec extractor;

  /// InvalidArgument on a violated invariant.
  void validate() const;
  /// Flat key=value lines covering every field.
  std::string descriptor() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  int batches = 0;
  double loss = 0.0;  // mean total loss over the epoch's batches
  double l2 = 0.0;
  double perceptual = 0.0;
  double ssim = 0.0;

  std::string to_json() const;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  /// One JSON object per line.
  std::string to_jsonl() const;
};

struct TrainOptions {
  /// Continue from this checkpoint instead of initializing from the seed.
  std::optional<std::filesystem::path> resume_from;
  /// JSONL epoch log; truncated on a fresh run, appended on resume.
  std::optional<std::filesystem::path> log_path;
  /// Also keep <stem>.epochNNNN<ext> next to the final checkpoint.
  bool keep_epoch_checkpoints = false;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains from scratch (or resumes) and writes the checkpoint to `out` after
/// every epoch, so `out` always holds the latest completed epoch. With
/// epochs == 0 the checkpoint is the initialization. DatasetEmpty,
/// NonFiniteLoss, ConfigMismatch (resume with a different model).
TrainLog train(const TrainConfig& config, const PairedDataset& data, const std::filesystem::path& out,
               const TrainOptions& options = {});

/// Eval-mode inference on one image.
Image enhance(const Image& img, ModelParams<float>& params, int rmt_patch = kDefaultRmtPatch);

struct EvalOptions {
  MetricSet metrics;
  int rmt_patch = kDefaultRmtPatch;
  /// When set, the checkpoint's model must match (ConfigMismatch otherwise).
  std::optional<ModelConfig> expected_model;
};

/// Enhances every degraded image and scores it against its clean pair.
MetricReport evaluate(const std::filesystem::path& checkpoint, const PairedDataset& data,
                      const EvalOptions& options = {});
/// No-reference variant; only uiqm / uciqe are allowed.
MetricReport evaluate(const std::filesystem::path& checkpoint, const std::vector<NamedImage>& images,
                      const EvalOptions& options);

}  // namespace atdc
