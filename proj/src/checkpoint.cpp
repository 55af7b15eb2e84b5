// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/checkpoint.hpp"

#include <bit>
#include <algorithm>
#include <map>

#include "atdc/error.hpp"
#include "fileio.hpp"

namespace atdc {
namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'T', 'D', 'C'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  void tensor(const std::string& name, const Tensor<float>& t) {
    str(name);
    u32(static_cast<std::uint32_t>(t.rank()));
    for (std::int64_t e : t.shape()) u64(static_cast<std::uint64_t>(e));
    for (float v : t.data()) f32(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::span<const std::uint8_t> view() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  NamedTensor<float> tensor() {
    NamedTensor<float> nt;
    nt.name = str();
    const std::uint32_t rank = u32();
    require(rank <= 8, ErrorCode::kCorruptData, "checkpoint: implausible rank for " + nt.name);
    Shape shape(rank);
    std::uint64_t count = 1;
    for (auto& e : shape) {
      e = static_cast<std::int64_t>(u64());
      require(e >= 0, ErrorCode::kCorruptData, "checkpoint: negative extent");
      count *= static_cast<std::uint64_t>(e);
    }
    need(count * 4);
    std::vector<float> data(count);
    for (auto& v : data) v = f32();
    nt.tensor = Tensor<float>(std::move(shape), std::move(data));
    return nt;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::uint64_t n) const {
    require(n <= b_.size() - pos_, ErrorCode::kCorruptData, "checkpoint: unexpected end of data");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

void copy_into(const NamedTensor<float>& src, Tensor<float>& dst) {
  require(src.tensor.shape() == dst.shape(), ErrorCode::kCorruptData,
          "checkpoint: " + src.name + " has shape " + shape_str(src.tensor.shape()) + ", model expects " +
              shape_str(dst.shape()));
  std::copy(src.tensor.data().begin(), src.tensor.data().end(), dst.data().begin());
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint8_t> serialize_checkpoint(const ModelParams<float>& params, const AdamState<float>& optimizer,
                                               const CheckpointMeta& meta,
                                               const std::vector<NamedTensor<float>>& extra) {
  const auto named = params.parameters();
  require(optimizer.m.empty() || (optimizer.m.size() == named.size() && optimizer.v.size() == named.size()),
          ErrorCode::kShapeMismatch, "checkpoint: optimizer state does not match the parameter list");
  Writer w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  w.str(params.config.descriptor());
  w.str(meta.train_descriptor);

  const auto buffers = params.buffers();
  w.u32(static_cast<std::uint32_t>(named.size() + buffers.size() + extra.size()));
  for (const auto& nt : named) w.tensor(nt.name, nt.tensor);
  for (const auto& nt : buffers) w.tensor(nt.name, nt.tensor);
  for (const auto& nt : extra) w.tensor(nt.name, nt.tensor);

  w.u64(static_cast<std::uint64_t>(optimizer.step));
  w.u32(static_cast<std::uint32_t>(optimizer.m.size()));
  for (std::size_t i = 0; i < optimizer.m.size(); ++i) {
    w.tensor("m." + named[i].name, optimizer.m[i]);
    w.tensor("v." + named[i].name, optimizer.v[i]);
  }
  w.str(meta.rng_state);
  w.u64(meta.epoch);
  w.u64(fnv1a64(w.view()));
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  require(bytes.size() >= 16, ErrorCode::kChecksumMismatch, "checkpoint: file too short");
  const auto body = bytes.first(bytes.size() - 8);
  require(fnv1a64(body) == Reader(bytes.last(8)).u64(), ErrorCode::kChecksumMismatch,
          "checkpoint: checksum does not match");

  Reader r(body);
  require(std::equal(std::begin(kMagic), std::end(kMagic), body.begin()), ErrorCode::kCorruptData,
          "checkpoint: bad magic");
  r.u32();
  const std::uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrorCode::kVersionUnsupported,
          "checkpoint: version " + std::to_string(version) + " is not supported");

  Checkpoint ck;
  const ModelConfig config = ModelConfig::from_descriptor(r.str());
  ck.meta.train_descriptor = r.str();
  ck.params = init_params<float>(0, config);

  std::map<std::string, Tensor<float>> slots;
  for (auto& nt : ck.params.parameters()) slots[nt.name] = nt.tensor;
  for (auto& nt : ck.params.buffers()) slots[nt.name] = nt.tensor;
  const std::size_t expected = slots.size();
  std::size_t filled = 0;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor<float> nt = r.tensor();
    auto it = slots.find(nt.name);
    if (it == slots.end()) {
      ck.extra.push_back(std::move(nt));
      continue;
    }
    copy_into(nt, it->second);
    slots.erase(it);
    ++filled;
  }
  require(filled == expected, ErrorCode::kCorruptData,
          "checkpoint: " + std::to_string(expected - filled) + " model tensors missing");

  ck.optimizer.step = static_cast<std::int64_t>(r.u64());
  const auto names = ck.params.parameters();
  const std::uint32_t moments = r.u32();
  require(moments == 0 || moments == names.size(), ErrorCode::kCorruptData, "checkpoint: optimizer table size");
  for (std::uint32_t i = 0; i < moments; ++i) {
    NamedTensor<float> m = r.tensor();
    NamedTensor<float> v = r.tensor();
    require(m.name == "m." + names[i].name && v.name == "v." + names[i].name, ErrorCode::kCorruptData,
            "checkpoint: optimizer entry out of order at " + names[i].name);
    require(m.tensor.shape() == names[i].tensor.shape() && v.tensor.shape() == names[i].tensor.shape(),
            ErrorCode::kCorruptData, "checkpoint: optimizer moment shape for " + names[i].name);
    ck.optimizer.m.push_back(std::move(m.tensor));
    ck.optimizer.v.push_back(std::move(v.tensor));
  }
  ck.meta.rng_state = r.str();
  ck.meta.epoch = r.u64();
  require(r.done(), ErrorCode::kCorruptData, "checkpoint: trailing bytes before checksum");
  return ck;
}

void save_checkpoint(const ModelParams<float>& params, const AdamState<float>& optimizer,
                     const CheckpointMeta& meta, const std::filesystem::path& path,
                     const std::vector<NamedTensor<float>>& extra) {
  io::write_file_atomic(path, serialize_checkpoint(params, optimizer, meta, extra));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(io::read_file(path)); }

FeatureExtractor<float> load_extractor(const std::filesystem::path& path, const ExtractorSpec& spec) {
  return FeatureExtractor<float>::from_named(spec, load_checkpoint(path).extra);
}

}  // namespace atdc
