// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/optim.hpp"

#include <cmath>

#include "atdc/error.hpp"

namespace atdc {

template <typename T>
void adam_step(std::span<Tensor<T>> params, AdamState<T>& state, const AdamOptions& opts) {
  if (state.m.empty() && state.v.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape());
      state.v.emplace_back(p.shape());
    }
  }
  require(state.m.size() == params.size() && state.v.size() == params.size(), ErrorCode::kShapeMismatch,
          "adam: state holds " + std::to_string(state.m.size()) + " entries for " + std::to_string(params.size()) +
              " parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(state.m[i].shape() == params[i].shape() && state.v[i].shape() == params[i].shape(),
            ErrorCode::kShapeMismatch, "adam: state shape mismatch at parameter " + std::to_string(i));
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    if (!p.has_grad()) continue;
    auto w = p.data();
    const auto g = p.grad();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = opts.beta1 * m[j] + (1.0 - opts.beta1) * gj;
      const double vj = opts.beta2 * v[j] + (1.0 - opts.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = opts.lr * (mj / bc1) / (std::sqrt(vj / bc2) + opts.eps);
      w[j] = static_cast<T>(w[j] - update);
    }
  }
}

template void adam_step(std::span<Tensor<float>>, AdamState<float>&, const AdamOptions&);
template void adam_step(std::span<Tensor<double>>, AdamState<double>&, const AdamOptions&);

}  // namespace atdc
