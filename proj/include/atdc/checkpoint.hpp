// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Binary checkpoint, all integers and floats little-endian:
//
//   "ATDC" | u32 version
//   str model descriptor | str train descriptor
//   u32 count, then per tensor: str name | u32 rank | u64 extents[rank] | f32 data
//   i64 optimizer step | u32 count | moment tensors (m.<name>, v.<name>)
//   str rng state | u64 epoch
//   u64 FNV-1a of every preceding byte
//
// where str is a u32 byte length followed by the bytes.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "atdc/losses.hpp"
#include "atdc/model.hpp"
#include "atdc/optim.hpp"

namespace atdc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  std::string rng_state;
  std::string train_descriptor;
};

struct Checkpoint {
  ModelParams<float> params;
  AdamState<float> optimizer;
  CheckpointMeta meta;
  /// Tensors in the file that are not part of the model, e.g. extractor weights.
  std::vector<NamedTensor<float>> extra;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<float>& params, const AdamState<float>& optimizer,
                                               const CheckpointMeta& meta,
                                               const std::vector<NamedTensor<float>>& extra = {});

/// ChecksumMismatch (including truncation), VersionUnsupported, CorruptData.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

/// Written to a temporary sibling and renamed into place. IoFailure on error.
void save_checkpoint(const ModelParams<float>& params, const AdamState<float>& optimizer,
                     const CheckpointMeta& meta, const std::filesystem::path& path,
                     const std::vector<NamedTensor<float>>& extra = {});
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Extractor weights stored as extra "phi.*" tensors of a checkpoint.
FeatureExtractor<float> load_extractor(const std::filesystem::path& path, const ExtractorSpec& spec);

}  // namespace atdc
