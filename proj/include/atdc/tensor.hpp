// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-mode automatic differentiation.
//
// A Tensor is a shared handle to a dense, row-major buffer. Operations take the
// Tape they run under; when the tape is recording and some input requires a
// gradient, the operation appends a backward closure to the tape. Entries are
// appended in execution order, so the tape is topologically sorted by
// construction and backward() replays it once in reverse.
//
// Everything is templated on the scalar type. float is the working precision;
// double instantiations exist so finite-difference checks are meaningful.

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace atdc {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tape;

namespace detail {

// Linear-algebra kernels choose their reduction order from the address
// alignment of their operands, so storage alignment must not vary between
// runs for results to be reproducible.
inline constexpr std::size_t kStorageAlign = 64;

template <typename T>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t{kStorageAlign}));
  }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, std::align_val_t{kStorageAlign}); }
  friend bool operator==(const AlignedAllocator&, const AlignedAllocator&) { return true; }
};

template <typename T>
using Storage = std::vector<T, AlignedAllocator<T>>;

template <typename T>
struct TensorNode {
  Shape shape;
  Storage<T> data;
  Storage<T> grad;
  bool requires_grad = false;
};
}  // namespace detail

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  /// Zero-filled tensor.
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static Tensor filled(Shape shape, T value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::int64_t dim(int axis) const { return node_->shape.at(static_cast<std::size_t>(axis)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(node_->data.size()); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  /// Gradient accumulator, writable through any handle to the node. Empty
  /// when the tensor carries no gradient.
  std::span<T> grad() const { return node_->grad; }
  void zero_grad();

  /// Turns gradient tracking on (allocating a zeroed accumulator) or off.
  void set_requires_grad(bool on);

  /// The single value of a one-element tensor; NotScalar otherwise.
  T item() const;

  /// Deep copy of the data with no gradient.
  Tensor detached() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  friend class Tape<T>;
  std::shared_ptr<detail::TensorNode<T>> node_;
};

enum class TapeMode { kRecord, kInference };

template <typename T>
class Tape {
 public:
  explicit Tape(TapeMode mode = TapeMode::kRecord) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return mode_ == TapeMode::kRecord; }

  /// True when an op over these inputs must be recorded.
  bool needs_record(std::initializer_list<const Tensor<T>*> inputs) const;
  bool needs_record(std::span<const Tensor<T>> inputs) const;

  /// Registers `output` as produced by an op whose gradient is propagated by
  /// `backward`. The output becomes a non-leaf tensor with a gradient buffer.
  void record(Tensor<T>& output, std::function<void()> backward);

  /// Accumulates d(loss)/d(t) into every reachable tensor t that requires a
  /// gradient. Intermediate gradients are reset first; leaf gradients add up
  /// across calls. Errors: NotScalar, DetachedGraph.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    Tensor<T> output;
    std::function<void()> backward;
  };
  TapeMode mode_;
  std::vector<Entry> entries_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

/// Element-type conversion (no gradient).
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& src) {
  std::vector<To> out(src.data().begin(), src.data().end());
  return Tensor<To>(src.shape(), std::move(out));
}

}  // namespace atdc
