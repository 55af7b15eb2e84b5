// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "atdc/error.hpp"

namespace atdc {
namespace {

std::atomic<bool> g_corrupt_conv_grad{false};

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

void check_rank(const Shape& s, std::size_t rank, const char* what) {
  require(s.size() == rank, ErrorCode::kShapeMismatch,
          std::string(what) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(s));
}

struct ConvGeom {
  std::int64_t n, cin, h, w, cout, k, stride, pad, ho, wo;
  std::int64_t rows() const { return cin * k * k; }
  std::int64_t cols() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1; }
};

template <typename T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const std::int64_t P = g.cols();
  for (std::int64_t ci = 0; ci < g.cin; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        T* row = col + ((ci * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          T* dst = row + oy * g.wo;
          const std::int64_t iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) {
            std::fill(dst, dst + g.wo, T(0));
            continue;
          }
          const T* src = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride + kx - g.pad;
            dst[ox] = (ix >= 0 && ix < g.w) ? src[ix] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeom& g, T* dx) {
  const std::int64_t P = g.cols();
  for (std::int64_t ci = 0; ci < g.cin; ++ci) {
    T* plane = dx + ci * g.h * g.w;
    for (std::int64_t ky = 0; ky < g.k; ++ky) {
      for (std::int64_t kx = 0; kx < g.k; ++kx) {
        const T* row = col + ((ci * g.k + ky) * g.k + kx) * P;
        for (std::int64_t oy = 0; oy < g.ho; ++oy) {
          const std::int64_t iy = oy * g.stride + ky - g.pad;
          if (iy < 0 || iy >= g.h) continue;
          const T* src = row + oy * g.wo;
          T* dst = plane + iy * g.w;
          for (std::int64_t ox = 0; ox < g.wo; ++ox) {
            const std::int64_t ix = ox * g.stride + kx - g.pad;
            if (ix >= 0 && ix < g.w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

enum class Broadcast { kSame, kPerChannel, kPerPixel };

template <typename T>
Broadcast broadcast_kind(const Tensor<T>& x, const Tensor<T>& y, const char* op) {
  if (x.shape() == y.shape()) return Broadcast::kSame;
  if (x.rank() == 4) {
    if (y.rank() == 2 && y.dim(0) == x.dim(0) && y.dim(1) == x.dim(1)) return Broadcast::kPerChannel;
    if (y.rank() == 4 && y.dim(0) == x.dim(0) && y.dim(1) == 1 && y.dim(2) == x.dim(2) && y.dim(3) == x.dim(3))
      return Broadcast::kPerPixel;
  }
  fail(ErrorCode::kShapeMismatch,
       std::string(op) + ": cannot combine " + shape_str(x.shape()) + " with " + shape_str(y.shape()));
}

// Calls f(i, j) for every element i of x and the element j of y it pairs with.
template <typename F>
void for_each_pair(Broadcast kind, const Shape& xs, F&& f) {
  const std::int64_t total = shape_numel(xs);
  if (kind == Broadcast::kSame) {
    for (std::int64_t i = 0; i < total; ++i) f(i, i);
    return;
  }
  const std::int64_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t ch = 0; ch < c; ++ch) {
      const std::int64_t base = (b * c + ch) * hw;
      for (std::int64_t p = 0; p < hw; ++p) {
        f(base + p, kind == Broadcast::kPerChannel ? b * c + ch : b * hw + p);
      }
    }
  }
}

}  // namespace

namespace testing {
void set_conv_grad_corruption(bool on) { g_corrupt_conv_grad = on; }
}  // namespace testing

template <typename T>
BatchNormState<T>::BatchNormState(std::int64_t channels)
    : running_mean(Shape{channels}), running_var(Tensor<T>::filled(Shape{channels}, T(1))) {}

template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, int stride) {
  check_rank(x.shape(), 4, "conv2d input");
  check_rank(weight.shape(), 4, "conv2d weight");
  check_rank(bias.shape(), 1, "conv2d bias");
  const std::int64_t k = weight.dim(2);
  require(k == weight.dim(3) && k % 2 == 1, ErrorCode::kShapeMismatch,
          "conv2d: kernel must be odd and square, got " + shape_str(weight.shape()));
  require(weight.dim(1) == x.dim(1), ErrorCode::kShapeMismatch,
          "conv2d: input channels " + shape_str(x.shape()) + " vs weight " + shape_str(weight.shape()));
  require(bias.dim(0) == weight.dim(0), ErrorCode::kShapeMismatch, "conv2d: bias length must equal Cout");
  require(stride >= 1, ErrorCode::kInvalidArgument, "conv2d: stride must be positive");

  ConvGeom g{};
  g.n = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.k = k;
  g.stride = stride;
  g.pad = k / 2;
  g.ho = (g.h + 2 * g.pad - k) / stride + 1;
  g.wo = (g.w + 2 * g.pad - k) / stride + 1;

  Tensor<T> out(Shape{g.n, g.cout, g.ho, g.wo});
  const ConstMatMap<T> wm(weight.data().data(), g.cout, g.rows());
  RowMat<T> col(g.pointwise() ? 0 : g.rows(), g.pointwise() ? 0 : g.cols());
  for (std::int64_t b = 0; b < g.n; ++b) {
    const T* xb = x.data().data() + b * g.cin * g.h * g.w;
    MatMap<T> ob(out.data().data() + b * g.cout * g.cols(), g.cout, g.cols());
    if (g.pointwise()) {
      ob.noalias() = wm * ConstMatMap<T>(xb, g.cin, g.cols());
    } else {
      im2col(xb, g, col.data());
      ob.noalias() = wm * col;
    }
    for (std::int64_t co = 0; co < g.cout; ++co) ob.row(co).array() += bias.data()[co];
  }

  if (tape.needs_record({&x, &weight, &bias})) {
    tape.record(out, [x, weight, bias, out, g]() mutable {
      const ConstMatMap<T> wm(weight.data().data(), g.cout, g.rows());
      RowMat<T> col(g.pointwise() ? 0 : g.rows(), g.pointwise() ? 0 : g.cols());
      RowMat<T> dcol;
      RowMat<T> dw = RowMat<T>::Zero(weight.requires_grad() ? g.cout : 0, weight.requires_grad() ? g.rows() : 0);
      for (std::int64_t b = 0; b < g.n; ++b) {
        const T* xb = x.data().data() + b * g.cin * g.h * g.w;
        const ConstMatMap<T> gb(out.grad().data() + b * g.cout * g.cols(), g.cout, g.cols());
        if (weight.requires_grad()) {
          if (g.pointwise()) {
            dw.noalias() += gb * ConstMatMap<T>(xb, g.cin, g.cols()).transpose();
          } else {
            im2col(xb, g, col.data());
            dw.noalias() += gb * col.transpose();
          }
        }
        if (bias.requires_grad()) {
          for (std::int64_t co = 0; co < g.cout; ++co) bias.grad()[co] += gb.row(co).sum();
        }
        if (x.requires_grad()) {
          T* dxb = x.grad().data() + b * g.cin * g.h * g.w;
          if (g.pointwise()) {
            MatMap<T>(dxb, g.cin, g.cols()).noalias() += wm.transpose() * gb;
          } else {
            dcol.noalias() = wm.transpose() * gb;
            col2im_add(dcol.data(), g, dxb);
          }
        }
      }
      if (weight.requires_grad()) {
        if (g_corrupt_conv_grad) dw *= T(1.01);
        MatMap<T>(weight.grad().data(), g.cout, g.rows()) += dw;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> batch_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     BatchNormState<T>& state, NormMode mode) {
  check_rank(x.shape(), 4, "batch_norm input");
  const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  require(gamma.numel() == c && beta.numel() == c && state.running_mean.numel() == c &&
              state.running_var.numel() == c,
          ErrorCode::kShapeMismatch, "batch_norm: parameter length must equal C for input " + shape_str(x.shape()));
  const std::int64_t count = n * hw;
  if (mode == NormMode::kTrain) {
    require(count >= 2, ErrorCode::kDegenerateBatch, "batch_norm: train mode needs at least 2 values per channel");
  }

  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.data().size());
  std::vector<T> inv_std(static_cast<std::size_t>(c));
  const T* xd = x.data().data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    double m = 0.0, var = 0.0;
    if (mode == NormMode::kTrain) {
      for (std::int64_t b = 0; b < n; ++b) {
        const T* p = xd + (b * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) m += p[i];
      }
      m /= static_cast<double>(count);
      for (std::int64_t b = 0; b < n; ++b) {
        const T* p = xd + (b * c + ch) * hw;
        for (std::int64_t i = 0; i < hw; ++i) {
          const double d = p[i] - m;
          var += d * d;
        }
      }
      var /= static_cast<double>(count);
      const double unbiased = var * static_cast<double>(count) / static_cast<double>(count - 1);
      T& rm = state.running_mean.data()[ch];
      T& rv = state.running_var.data()[ch];
      rm = static_cast<T>((1.0 - kBatchNormMomentum) * rm + kBatchNormMomentum * m);
      rv = static_cast<T>((1.0 - kBatchNormMomentum) * rv + kBatchNormMomentum * unbiased);
    } else {
      m = state.running_mean.data()[ch];
      var = state.running_var.data()[ch];
    }
    const double is = 1.0 / std::sqrt(var + kBatchNormEps);
    inv_std[ch] = static_cast<T>(is);
    const T gm = gamma.data()[ch], bt = beta.data()[ch];
    for (std::int64_t b = 0; b < n; ++b) {
      const std::int64_t base = (b * c + ch) * hw;
      for (std::int64_t i = 0; i < hw; ++i) {
        const T xh = static_cast<T>((xd[base + i] - m) * is);
        xhat[base + i] = xh;
        out.data()[base + i] = gm * xh + bt;
      }
    }
  }

  if (tape.needs_record({&x, &gamma, &beta})) {
    tape.record(out, [x, gamma, beta, out, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c, hw,
                      count, mode]() mutable {
      const T* g = out.grad().data();
      for (std::int64_t ch = 0; ch < c; ++ch) {
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::int64_t b = 0; b < n; ++b) {
          const std::int64_t base = (b * c + ch) * hw;
          for (std::int64_t i = 0; i < hw; ++i) {
            sum_g += g[base + i];
            sum_gx += static_cast<double>(g[base + i]) * xhat[base + i];
          }
        }
        if (gamma.requires_grad()) gamma.grad()[ch] += static_cast<T>(sum_gx);
        if (beta.requires_grad()) beta.grad()[ch] += static_cast<T>(sum_g);
        if (!x.requires_grad()) continue;
        const double gm = gamma.data()[ch];
        const double is = inv_std[ch];
        T* dx = x.grad().data();
        for (std::int64_t b = 0; b < n; ++b) {
          const std::int64_t base = (b * c + ch) * hw;
          for (std::int64_t i = 0; i < hw; ++i) {
            if (mode == NormMode::kTrain) {
              const double inner = static_cast<double>(count) * g[base + i] - sum_g - xhat[base + i] * sum_gx;
              dx[base + i] += static_cast<T>(gm * is * inner / static_cast<double>(count));
            } else {
              dx[base + i] += static_cast<T>(gm * is * g[base + i]);
            }
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope) {
  require(slope > T(0) && slope < T(1), ErrorCode::kInvalidArgument, "leaky_relu: slope must be in (0,1)");
  Tensor<T> out(x.shape());
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = xd[i] >= T(0) ? xd[i] : slope * xd[i];
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out, slope]() mutable {
      const auto xd = x.data();
      const auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < xd.size(); ++i) dx[i] += xd[i] >= T(0) ? g[i] : slope * g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T(1), T(0));
  Tensor<T> out(x.shape());
  const auto xd = x.data();
  auto od = out.data();
  for (std::size_t i = 0; i < xd.size(); ++i) {
    const T v = xd[i];
    T y;
    if (v >= T(0)) {
      y = T(1) / (T(1) + std::exp(-v));
    } else {
      const T e = std::exp(v);
      y = e / (T(1) + e);
    }
    od[i] = std::clamp(y, lo, hi);
  }
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out]() mutable {
      const auto y = out.data();
      const auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
    });
  }
  return out;
}

template <typename T>
Tensor<T> fully_connected(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  check_rank(x.shape(), 2, "fully_connected input");
  check_rank(weight.shape(), 2, "fully_connected weight");
  check_rank(bias.shape(), 1, "fully_connected bias");
  const std::int64_t n = x.dim(0), din = x.dim(1), dout = weight.dim(0);
  require(weight.dim(1) == din && bias.dim(0) == dout, ErrorCode::kShapeMismatch,
          "fully_connected: " + shape_str(x.shape()) + " x " + shape_str(weight.shape()) + " + " +
              shape_str(bias.shape()));
  Tensor<T> out(Shape{n, dout});
  MatMap<T> om(out.data().data(), n, dout);
  const ConstMatMap<T> xm(x.data().data(), n, din);
  const ConstMatMap<T> wm(weight.data().data(), dout, din);
  om.noalias() = xm * wm.transpose();
  for (std::int64_t b = 0; b < n; ++b) {
    for (std::int64_t j = 0; j < dout; ++j) om(b, j) += bias.data()[j];
  }
  if (tape.needs_record({&x, &weight, &bias})) {
    tape.record(out, [x, weight, bias, out, n, din, dout]() mutable {
      const ConstMatMap<T> gm(out.grad().data(), n, dout);
      if (x.requires_grad()) {
        MatMap<T>(x.grad().data(), n, din).noalias() += gm * ConstMatMap<T>(weight.data().data(), dout, din);
      }
      if (weight.requires_grad()) {
        MatMap<T>(weight.grad().data(), dout, din).noalias() +=
            gm.transpose() * ConstMatMap<T>(x.data().data(), n, din);
      }
      if (bias.requires_grad()) {
        for (std::int64_t b = 0; b < n; ++b) {
          for (std::int64_t j = 0; j < dout; ++j) bias.grad()[j] += gm(b, j);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
  check_rank(x.shape(), 4, "global_avg_pool input");
  const std::int64_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  Tensor<T> out(Shape{n, c});
  for (std::int64_t i = 0; i < n * c; ++i) {
    double s = 0.0;
    const T* p = x.data().data() + i * hw;
    for (std::int64_t j = 0; j < hw; ++j) s += p[j];
    out.data()[i] = static_cast<T>(s / static_cast<double>(hw));
  }
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out, n, c, hw]() mutable {
      for (std::int64_t i = 0; i < n * c; ++i) {
        const T g = out.grad()[i] / static_cast<T>(hw);
        T* dx = x.grad().data() + i * hw;
        for (std::int64_t j = 0; j < hw; ++j) dx[j] += g;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), ErrorCode::kShapeMismatch, "concat_channels: empty input list");
  const Shape& ref = xs.front().shape();
  require(ref.size() == 2 || ref.size() == 4, ErrorCode::kShapeMismatch, "concat_channels: rank must be 2 or 4");
  std::int64_t total_c = 0;
  for (const auto& t : xs) {
    bool ok = t.rank() == static_cast<int>(ref.size()) && t.dim(0) == ref[0];
    for (std::size_t a = 2; ok && a < ref.size(); ++a) ok = t.shape()[a] == ref[a];
    require(ok, ErrorCode::kShapeMismatch,
            "concat_channels: " + shape_str(t.shape()) + " incompatible with " + shape_str(ref));
    total_c += t.dim(1);
  }
  const std::int64_t n = ref[0];
  const std::int64_t inner = ref.size() == 4 ? ref[2] * ref[3] : 1;
  Shape out_shape = ref;
  out_shape[1] = total_c;
  Tensor<T> out(out_shape);
  std::int64_t offset = 0;
  for (const auto& t : xs) {
    const std::int64_t block = t.dim(1) * inner;
    for (std::int64_t b = 0; b < n; ++b) {
      std::copy_n(t.data().data() + b * block, block, out.data().data() + (b * total_c + offset) * inner);
    }
    offset += t.dim(1);
  }
  if (tape.needs_record(std::span<const Tensor<T>>(xs))) {
    tape.record(out, [xs, out, n, inner, total_c]() mutable {
      std::int64_t offset = 0;
      for (auto& t : xs) {
        const std::int64_t block = t.dim(1) * inner;
        if (t.requires_grad()) {
          for (std::int64_t b = 0; b < n; ++b) {
            const T* g = out.grad().data() + (b * total_c + offset) * inner;
            T* dx = t.grad().data() + b * block;
            for (std::int64_t i = 0; i < block; ++i) dx[i] += g[i];
          }
        }
        offset += t.dim(1);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  const Broadcast kind = broadcast_kind(x, y, "add");
  Tensor<T> out(x.shape());
  {
    const T* xd = x.data().data();
    const T* yd = y.data().data();
    T* od = out.data().data();
    for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { od[i] = xd[i] + yd[j]; });
  }
  if (tape.needs_record({&x, &y})) {
    tape.record(out, [x, y, out, kind]() mutable {
      const T* g = out.grad().data();
      if (x.requires_grad()) {
        T* dx = x.grad().data();
        for (std::int64_t i = 0; i < x.numel(); ++i) dx[i] += g[i];
      }
      if (y.requires_grad()) {
        T* dy = y.grad().data();
        for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { dy[j] += g[i]; });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  const Broadcast kind = broadcast_kind(x, y, "sub");
  Tensor<T> out(x.shape());
  {
    const T* xd = x.data().data();
    const T* yd = y.data().data();
    T* od = out.data().data();
    for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { od[i] = xd[i] - yd[j]; });
  }
  if (tape.needs_record({&x, &y})) {
    tape.record(out, [x, y, out, kind]() mutable {
      const T* g = out.grad().data();
      if (x.requires_grad()) {
        T* dx = x.grad().data();
        for (std::int64_t i = 0; i < x.numel(); ++i) dx[i] += g[i];
      }
      if (y.requires_grad()) {
        T* dy = y.grad().data();
        for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { dy[j] -= g[i]; });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& y) {
  const Broadcast kind = broadcast_kind(x, y, "mul");
  Tensor<T> out(x.shape());
  {
    const T* xd = x.data().data();
    const T* yd = y.data().data();
    T* od = out.data().data();
    for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { od[i] = xd[i] * yd[j]; });
  }
  if (tape.needs_record({&x, &y})) {
    tape.record(out, [x, y, out, kind]() mutable {
      const T* g = out.grad().data();
      const T* xd = x.data().data();
      const T* yd = y.data().data();
      if (x.requires_grad()) {
        T* dx = x.grad().data();
        for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { dx[i] += g[i] * yd[j]; });
      }
      if (y.requires_grad()) {
        T* dy = y.grad().data();
        for_each_pair(kind, x.shape(), [&](std::int64_t i, std::int64_t j) { dy[j] += g[i] * xd[i]; });
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] * factor;
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out, factor]() mutable {
      for (std::int64_t i = 0; i < x.numel(); ++i) x.grad()[i] += out.grad()[i] * factor;
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_scalar(Tape<T>& tape, const Tensor<T>& x, T offset) {
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data()[i] = x.data()[i] + offset;
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out]() mutable {
      for (std::int64_t i = 0; i < x.numel(); ++i) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> clamp(Tape<T>& tape, const Tensor<T>& x, T lo, T hi) {
  require(lo <= hi, ErrorCode::kInvalidArgument, "clamp: lo > hi");
  Tensor<T> out(x.shape());
  for (std::int64_t i = 0; i < x.numel(); ++i) out.data()[i] = std::clamp(x.data()[i], lo, hi);
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out, lo, hi]() mutable {
      for (std::int64_t i = 0; i < x.numel(); ++i) {
        const T v = x.data()[i];
        if (v >= lo && v <= hi) x.grad()[i] += out.grad()[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.data()) s += v;
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(s)});
  if (tape.needs_record({&x})) {
    tape.record(out, [x, out]() mutable {
      const T g = out.grad()[0];
      for (auto& d : x.grad()) d += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  require(x.numel() > 0, ErrorCode::kShapeMismatch, "mean of empty tensor");
  return scale(tape, sum(tape, x), static_cast<T>(1.0 / static_cast<double>(x.numel())));
}

#define ATDC_INSTANTIATE_OPS(T)                                                                                 \
  template struct BatchNormState<T>;                                                                            \
  template Tensor<T> conv2d(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);             \
  template Tensor<T> batch_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                BatchNormState<T>&, NormMode);                                                  \
  template Tensor<T> leaky_relu(Tape<T>&, const Tensor<T>&, T);                                                 \
  template Tensor<T> sigmoid(Tape<T>&, const Tensor<T>&);                                                       \
  template Tensor<T> fully_connected(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> global_avg_pool(Tape<T>&, const Tensor<T>&);                                               \
  template Tensor<T> concat_channels(Tape<T>&, const std::vector<Tensor<T>>&);                                  \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> sub(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                         \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                                      \
  template Tensor<T> add_scalar(Tape<T>&, const Tensor<T>&, T);                                                 \
  template Tensor<T> clamp(Tape<T>&, const Tensor<T>&, T, T);                                                   \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                                           \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);

ATDC_INSTANTIATE_OPS(float)
ATDC_INSTANTIATE_OPS(double)

}  // namespace atdc
