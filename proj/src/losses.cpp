// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/losses.hpp"

#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "atdc/error.hpp"
#include "atdc/rng.hpp"

namespace atdc {
namespace {

void check_pair(const Shape& a, const Shape& b, const char* what) {
  require(a == b, ErrorCode::kShapeMismatch, std::string(what) + ": " + shape_str(a) + " vs " + shape_str(b));
  require(a.size() == 4 && a[0] >= 1, ErrorCode::kShapeMismatch, std::string(what) + ": expected [N,C,H,W]");
}

const std::array<double, kSsimWindow>& gaussian_window() {
  static const std::array<double, kSsimWindow> g = [] {
    std::array<double, kSsimWindow> w{};
    double total = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
      const double d = i - kSsimWindow / 2;
      w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
      total += w[i];
    }
    for (double& v : w) v /= total;
    return w;
  }();
  return g;
}

// Separable Gaussian over the valid region: h x w -> (h-10) x (w-10).
void blur_valid(const double* in, int h, int w, double* out, std::vector<double>& tmp) {
  const auto& g = gaussian_window();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * in[static_cast<std::size_t>(y) * w + x + k];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) s += g[k] * tmp[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
}

// Adjoint of blur_valid: out (h x w) receives the scatter of g_in.
void blur_valid_adjoint(const double* g_in, int h, int w, double* out, std::vector<double>& tmp) {
  const auto& g = gaussian_window();
  const int ow = w - kSsimWindow + 1, oh = h - kSsimWindow + 1;
  tmp.assign(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = g_in[static_cast<std::size_t>(y) * ow + x];
      for (int k = 0; k < kSsimWindow; ++k) tmp[static_cast<std::size_t>(y + k) * ow + x] += g[k] * v;
    }
  }
  std::fill(out, out + static_cast<std::size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double v = tmp[static_cast<std::size_t>(y) * ow + x];
      for (int k = 0; k < kSsimWindow; ++k) out[static_cast<std::size_t>(y) * w + x + k] += g[k] * v;
    }
  }
}

template <typename T>
std::vector<double> plane(const Tensor<T>& t, std::int64_t index, std::int64_t hw) {
  const T* p = t.data().data() + index * hw;
  return std::vector<double>(p, p + hw);
}

template <typename T>
ConvParams<T> seeded_stage(Rng& rng, std::int64_t cin, std::int64_t cout, double slope) {
  const double bound = std::sqrt(6.0 / (1.0 + slope * slope)) / std::sqrt(static_cast<double>(cin * 9));
  ConvParams<T> p{Tensor<T>(Shape{cout, cin, 3, 3}), Tensor<T>(Shape{cout})};
  // Drawn in single precision so both instantiations hold identical weights.
  for (auto& v : p.weight.data()) v = static_cast<T>(static_cast<float>(rng.uniform(-bound, bound)));
  return p;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma}) {
    require(std::isfinite(w) && w >= 0.0, ErrorCode::kInvalidArgument, "loss weights must be finite and >= 0");
  }
}

std::string ExtractorSpec::descriptor() const {
  std::ostringstream os;
  os << "channels=";
  for (std::size_t i = 0; i < channels.size(); ++i) os << (i ? "," : "") << channels[i];
  os.precision(17);
  os << ";stride=" << stride << ";slope=" << slope << ";seed=" << seed;
  return os.str();
}

ExtractorSpec ExtractorSpec::from_descriptor(std::string_view text) {
  std::map<std::string, std::string> kv;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(';', pos), text.size());
    const std::string_view item = text.substr(pos, end - pos);
    const std::size_t eq = item.find('=');
    require(eq != std::string_view::npos, ErrorCode::kCorruptData, "extractor descriptor: malformed item");
    kv[std::string(item.substr(0, eq))] = std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  for (const char* key : {"channels", "stride", "slope", "seed"}) {
    require(kv.count(key) == 1, ErrorCode::kCorruptData, std::string("extractor descriptor: missing ") + key);
  }
  ExtractorSpec s;
  s.channels.clear();
  try {
    std::istringstream cs(kv["channels"]);
    for (std::string part; std::getline(cs, part, ',');) s.channels.push_back(std::stoi(part));
    s.stride = std::stoi(kv["stride"]);
    s.slope = std::stod(kv["slope"]);
    s.seed = std::stoull(kv["seed"]);
  } catch (const std::logic_error&) {
    fail(ErrorCode::kCorruptData, "extractor descriptor has a malformed value");
  }
  return s;
}

template <typename T>
FeatureExtractor<T>::FeatureExtractor(const ExtractorSpec& spec) : spec_(spec) {
  require(!spec.channels.empty() && spec.stride >= 1, ErrorCode::kInvalidArgument, "extractor: bad architecture");
  Rng rng(spec.seed);
  std::int64_t cin = 3;
  for (int c : spec.channels) {
    require(c >= 1, ErrorCode::kInvalidArgument, "extractor: channel counts must be positive");
    stages_.push_back(seeded_stage<T>(rng, cin, c, spec.slope));
    cin = c;
  }
}

template <typename T>
FeatureExtractor<T>::FeatureExtractor(const ExtractorSpec& spec, std::vector<ConvParams<T>> stages)
    : spec_(spec), stages_(std::move(stages)) {
  require(stages_.size() == spec_.channels.size(), ErrorCode::kShapeMismatch, "extractor: stage count mismatch");
  std::int64_t cin = 3;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const auto& w = stages_[i].weight;
    require(w.defined() && w.rank() == 4 && w.dim(0) == spec_.channels[i] && w.dim(1) == cin,
            ErrorCode::kShapeMismatch, "extractor: stage " + std::to_string(i) + " has the wrong weight shape");
    require(stages_[i].bias.defined() && stages_[i].bias.numel() == w.dim(0), ErrorCode::kShapeMismatch,
            "extractor: stage " + std::to_string(i) + " has the wrong bias shape");
    stages_[i].weight.set_requires_grad(false);
    stages_[i].bias.set_requires_grad(false);
    cin = w.dim(0);
  }
}

template <typename T>
Tensor<T> FeatureExtractor<T>::features(Tape<T>& tape, const Tensor<T>& x, int layer) const {
  require(layer >= 0 && layer < num_layers(), ErrorCode::kInvalidLayer,
          "extractor has " + std::to_string(num_layers()) + " layers, asked for " + std::to_string(layer));
  Tensor<T> h = x;
  for (int i = 0; i <= layer; ++i) {
    h = conv2d(tape, h, stages_[i].weight, stages_[i].bias, spec_.stride);
    h = leaky_relu(tape, h, static_cast<T>(spec_.slope));
  }
  return h;
}

template <typename T>
std::vector<NamedTensor<T>> FeatureExtractor<T>::named_tensors() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    const std::string base = "phi.stage" + std::to_string(i);
    out.push_back({base + ".weight", stages_[i].weight});
    out.push_back({base + ".bias", stages_[i].bias});
  }
  return out;
}

template <typename T>
FeatureExtractor<T> FeatureExtractor<T>::from_named(const ExtractorSpec& spec,
                                                    const std::vector<NamedTensor<T>>& tensors) {
  std::map<std::string, Tensor<T>> by_name;
  for (const auto& nt : tensors) by_name[nt.name] = nt.tensor.detached();
  std::vector<ConvParams<T>> stages;
  for (std::size_t i = 0; i < spec.channels.size(); ++i) {
    const std::string base = "phi.stage" + std::to_string(i);
    require(by_name.count(base + ".weight") && by_name.count(base + ".bias"), ErrorCode::kNotFound,
            "extractor weights missing " + base);
    stages.push_back({by_name[base + ".weight"], by_name[base + ".bias"]});
  }
  return FeatureExtractor(spec, std::move(stages));
}

namespace detail {

double ssim_plane(const double* x, const double* y, int height, int width, double* dx, double* dy,
                  double grad_scale) {
  require(height >= kSsimWindow && width >= kSsimWindow, ErrorCode::kTooSmall,
          "SSIM needs at least " + std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) + " pixels");
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  const std::size_t n = static_cast<std::size_t>(height) * width;
  const int oh = height - kSsimWindow + 1, ow = width - kSsimWindow + 1;
  const std::size_t m = static_cast<std::size_t>(oh) * ow;

  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  std::vector<double> tmp, mu_x(m), mu_y(m), e_xx(m), e_yy(m), e_xy(m);
  blur_valid(x, height, width, mu_x.data(), tmp);
  blur_valid(y, height, width, mu_y.data(), tmp);
  blur_valid(xx.data(), height, width, e_xx.data(), tmp);
  blur_valid(yy.data(), height, width, e_yy.data(), tmp);
  blur_valid(xy.data(), height, width, e_xy.data(), tmp);

  const bool want_grad = dx != nullptr || dy != nullptr;
  std::vector<double> g_mx, g_my, g_xx, g_yy, g_xy;
  if (want_grad) {
    g_mx.resize(m), g_my.resize(m), g_xx.resize(m), g_yy.resize(m), g_xy.resize(m);
  }
  const double per = grad_scale / static_cast<double>(m);
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double mx = mu_x[i], my = mu_y[i];
    const double a1 = 2.0 * mx * my + c1;
    const double a2 = 2.0 * (e_xy[i] - mx * my) + c2;
    const double b1 = mx * mx + my * my + c1;
    const double b2 = (e_xx[i] - mx * mx) + (e_yy[i] - my * my) + c2;
    const double s = a1 * a2 / (b1 * b2);
    total += s;
    if (!want_grad) continue;
    const double inv = 1.0 / (b1 * b2);
    g_mx[i] = per * ((2.0 * my * a2 - 2.0 * my * a1) * inv - s * (2.0 * mx / b1 - 2.0 * mx / b2));
    g_my[i] = per * ((2.0 * mx * a2 - 2.0 * mx * a1) * inv - s * (2.0 * my / b1 - 2.0 * my / b2));
    g_xx[i] = per * (-s / b2);
    g_yy[i] = per * (-s / b2);
    g_xy[i] = per * (2.0 * a1 * inv);
  }

  if (want_grad) {
    std::vector<double> b_mx(n), b_my(n), b_xx(n), b_yy(n), b_xy(n);
    blur_valid_adjoint(g_xy.data(), height, width, b_xy.data(), tmp);
    if (dx) {
      blur_valid_adjoint(g_mx.data(), height, width, b_mx.data(), tmp);
      blur_valid_adjoint(g_xx.data(), height, width, b_xx.data(), tmp);
      for (std::size_t i = 0; i < n; ++i) dx[i] += b_mx[i] + 2.0 * x[i] * b_xx[i] + y[i] * b_xy[i];
    }
    if (dy) {
      blur_valid_adjoint(g_my.data(), height, width, b_my.data(), tmp);
      blur_valid_adjoint(g_yy.data(), height, width, b_yy.data(), tmp);
      for (std::size_t i = 0; i < n; ++i) dy[i] += b_my[i] + 2.0 * y[i] * b_yy[i] + x[i] * b_xy[i];
    }
  }
  return total / static_cast<double>(m);
}

}  // namespace detail

template <typename T>
Tensor<T> l2_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref) {
  check_pair(j.shape(), j_ref.shape(), "l2_loss");
  const std::int64_t n = j.dim(0), per = j.numel() / n;
  std::vector<double> norms(static_cast<std::size_t>(n));
  double total = 0.0;
  for (std::int64_t b = 0; b < n; ++b) {
    double s = 0.0;
    for (std::int64_t i = b * per; i < (b + 1) * per; ++i) {
      const double d = static_cast<double>(j.data()[i]) - j_ref.data()[i];
      s += d * d;
    }
    norms[b] = std::sqrt(s);
    total += norms[b];
  }
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(n))});
  if (tape.needs_record({&j, &j_ref})) {
    tape.record(out, [j, j_ref, out, norms = std::move(norms), n, per]() {
      const double g = out.grad()[0] / static_cast<double>(n);
      for (std::int64_t b = 0; b < n; ++b) {
        // The norm is not differentiable at zero; use the zero subgradient.
        if (norms[b] == 0.0) continue;
        const double k = g / norms[b];
        for (std::int64_t i = b * per; i < (b + 1) * per; ++i) {
          const double d = static_cast<double>(j.data()[i]) - j_ref.data()[i];
          if (j.requires_grad()) j.grad()[i] += static_cast<T>(k * d);
          if (j_ref.requires_grad()) j_ref.grad()[i] -= static_cast<T>(k * d);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> perceptual_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref,
                          const FeatureExtractor<T>& phi, int layer) {
  check_pair(j.shape(), j_ref.shape(), "perceptual_loss");
  const Tensor<T> fa = phi.features(tape, j, layer);
  const Tensor<T> fb = phi.features(tape, j_ref, layer);
  const double denom = static_cast<double>(fa.dim(1) * fa.dim(2) * fa.dim(3));
  double total = 0.0;
  for (std::int64_t i = 0; i < fa.numel(); ++i) total += std::abs(static_cast<double>(fa.data()[i]) - fb.data()[i]);
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(total / denom)});
  if (tape.needs_record({&fa, &fb})) {
    tape.record(out, [fa, fb, out, denom]() {
      const T g = static_cast<T>(out.grad()[0] / denom);
      for (std::int64_t i = 0; i < fa.numel(); ++i) {
        const T d = fa.data()[i] - fb.data()[i];
        const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
        if (fa.requires_grad()) fa.grad()[i] += s;
        if (fb.requires_grad()) fb.grad()[i] -= s;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> ssim_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref) {
  check_pair(j.shape(), j_ref.shape(), "ssim_loss");
  const std::int64_t n = j.dim(0), c = j.dim(1), h = j.dim(2), w = j.dim(3), hw = h * w;
  require(h >= kSsimWindow && w >= kSsimWindow, ErrorCode::kTooSmall,
          "ssim_loss: images must be at least 11x11, got " + shape_str(j.shape()));
  const bool grad = tape.needs_record({&j, &j_ref});
  double total = 0.0;
  for (std::int64_t p = 0; p < n * c; ++p) {
    const auto x = plane(j, p, hw), y = plane(j_ref, p, hw);
    total += detail::ssim_plane(x.data(), y.data(), static_cast<int>(h), static_cast<int>(w));
  }
  Tensor<T> out(Shape{1}, std::vector<T>{static_cast<T>(1.0 - total / static_cast<double>(n * c))});
  if (grad) {
    tape.record(out, [j, j_ref, out, n, c, h, w, hw]() {
      const double scale = -static_cast<double>(out.grad()[0]) / static_cast<double>(n * c);
      std::vector<double> dx(static_cast<std::size_t>(hw)), dy(static_cast<std::size_t>(hw));
      for (std::int64_t p = 0; p < n * c; ++p) {
        const auto x = plane(j, p, hw), y = plane(j_ref, p, hw);
        std::fill(dx.begin(), dx.end(), 0.0);
        std::fill(dy.begin(), dy.end(), 0.0);
        detail::ssim_plane(x.data(), y.data(), static_cast<int>(h), static_cast<int>(w),
                           j.requires_grad() ? dx.data() : nullptr, j_ref.requires_grad() ? dy.data() : nullptr,
                           scale);
        for (std::int64_t i = 0; i < hw; ++i) {
          if (j.requires_grad()) j.grad()[p * hw + i] += static_cast<T>(dx[i]);
          if (j_ref.requires_grad()) j_ref.grad()[p * hw + i] += static_cast<T>(dy[i]);
        }
      }
    });
  }
  return out;
}

template <typename T>
LossTerms<T> total_loss(Tape<T>& tape, const Tensor<T>& j, const Tensor<T>& j_ref, const FeatureExtractor<T>& phi,
                        const LossWeights& weights) {
  weights.validate();
  LossTerms<T> terms;
  terms.l2 = l2_loss(tape, j, j_ref);
  terms.perceptual = perceptual_loss(tape, j, j_ref, phi, phi.last_layer());
  terms.ssim = ssim_loss(tape, j, j_ref);
  Tensor<T> total = scale(tape, terms.l2, static_cast<T>(weights.alpha));
  total = add(tape, total, scale(tape, terms.perceptual, static_cast<T>(weights.beta)));
  total = add(tape, total, scale(tape, terms.ssim, static_cast<T>(weights.gamma)));
  terms.total = total;
  return terms;
}

#define ATDC_INSTANTIATE_LOSSES(T)                                                                           \
  template class FeatureExtractor<T>;                                                                        \
  template Tensor<T> l2_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> perceptual_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&, \
                                     int);                                                                   \
  template Tensor<T> ssim_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                                \
  template LossTerms<T> total_loss(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&, \
                                   const LossWeights&);

ATDC_INSTANTIATE_LOSSES(float)
ATDC_INSTANTIATE_LOSSES(double)

}  // namespace atdc
