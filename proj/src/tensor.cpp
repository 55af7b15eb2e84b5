// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/tensor.hpp"

#include <algorithm>

#include "atdc/error.hpp"

namespace atdc {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    require(d >= 0, ErrorCode::kShapeMismatch, "negative extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<detail::TensorNode<T>>()) {
  node_->data.assign(static_cast<std::size_t>(shape_numel(shape)), T(0));
  node_->shape = std::move(shape);
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data, bool requires_grad)
    : node_(std::make_shared<detail::TensorNode<T>>()) {
  require(static_cast<std::int64_t>(data.size()) == shape_numel(shape), ErrorCode::kShapeMismatch,
          "data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  node_->shape = std::move(shape);
  node_->data.assign(data.begin(), data.end());
  set_requires_grad(requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.node_->data.begin(), t.node_->data.end(), value);
  return t;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) {
    node_->grad.assign(node_->data.size(), T(0));
  } else {
    node_->grad.clear();
    node_->grad.shrink_to_fit();
  }
}

template <typename T>
T Tensor<T>::item() const {
  require(defined() && numel() == 1, ErrorCode::kNotScalar,
          "item() on tensor of shape " + (defined() ? shape_str(shape()) : std::string("<undefined>")));
  return node_->data[0];
}

template <typename T>
Tensor<T> Tensor<T>::detached() const {
  return Tensor(node_->shape, std::vector<T>(node_->data.begin(), node_->data.end()), false);
}

template <typename T>
bool Tape<T>::needs_record(std::initializer_list<const Tensor<T>*> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>* t) { return t && t->requires_grad(); });
}

template <typename T>
bool Tape<T>::needs_record(std::span<const Tensor<T>> inputs) const {
  if (!recording()) return false;
  return std::any_of(inputs.begin(), inputs.end(), [](const Tensor<T>& t) { return t.requires_grad(); });
}

template <typename T>
void Tape<T>::record(Tensor<T>& output, std::function<void()> backward) {
  output.set_requires_grad(true);
  entries_.push_back(Entry{output, std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  require(loss.defined() && loss.numel() == 1, ErrorCode::kNotScalar,
          "backward() needs a one-element loss, got " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  std::size_t end = entries_.size();
  while (end > 0 && !entries_[end - 1].output.same_node(loss)) --end;
  require(end > 0, ErrorCode::kDetachedGraph, "loss was not produced under this tape");

  for (std::size_t i = 0; i < end; ++i) entries_[i].output.zero_grad();
  entries_[end - 1].output.grad()[0] = T(1);
  for (std::size_t i = end; i-- > 0;) entries_[i].backward();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace atdc
