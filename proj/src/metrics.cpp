// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

#include "atdc/metrics.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "atdc/error.hpp"
#include "atdc/losses.hpp"

namespace atdc {
namespace {

void check_same(const Image& a, const Image& b, const char* what) {
  require(a.height() == b.height() && a.width() == b.width(), ErrorCode::kShapeMismatch,
          std::string(what) + ": " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
              std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

std::vector<double> channel_plane(const Image& img, int c, double scale) {
  std::vector<double> p(img.pixels());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = img.data()[i * 3 + c] * scale;
  return p;
}

// Asymmetric alpha-trimmed mean, and the spread about it over all samples.
std::pair<double, double> trimmed_stats(std::vector<double> v, double alpha_lo, double alpha_hi) {
  const std::size_t k = v.size();
  const auto lo = static_cast<std::size_t>(std::ceil(alpha_lo * static_cast<double>(k)));
  const auto hi = static_cast<std::size_t>(std::floor(alpha_hi * static_cast<double>(k)));
  std::vector<double> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  double mu = 0.0;
  for (std::size_t i = lo; i < k - hi; ++i) mu += sorted[i];
  mu /= static_cast<double>(k - hi - lo);
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  return {mu, var / static_cast<double>(k)};
}

double uicm(const Image& img) {
  const std::size_t n = img.pixels();
  std::vector<double> rg(n), yb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = img.data()[i * 3] * 255.0, g = img.data()[i * 3 + 1] * 255.0, b = img.data()[i * 3 + 2] * 255.0;
    rg[i] = r - g;
    yb[i] = (r + g) / 2.0 - b;
  }
  const auto [mu_rg, var_rg] = trimmed_stats(std::move(rg), 0.1, 0.1);
  const auto [mu_yb, var_yb] = trimmed_stats(std::move(yb), 0.1, 0.1);
  return -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) + 0.1586 * std::sqrt(var_rg + var_yb);
}

std::vector<double> sobel_magnitude(const std::vector<double>& p, int h, int w) {
  const auto at = [&](int y, int x) {
    return p[static_cast<std::size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };
  std::vector<double> out(p.size());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
      const double gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
                        (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
      out[static_cast<std::size_t>(y) * w + x] = std::hypot(gx, gy);
    }
  }
  return out;
}

// Calls f(y0, x0) for every full block x block tile; partial tiles are dropped.
template <typename F>
void for_each_block(int h, int w, int block, F&& f) {
  for (int by = 0; by + block <= h; by += block) {
    for (int bx = 0; bx + block <= w; bx += block) f(by, bx);
  }
}

double eme(const std::vector<double>& p, int h, int w) {
  const int k1 = w / kUiqmBlock, k2 = h / kUiqmBlock;
  double acc = 0.0;
  for_each_block(h, w, kUiqmBlock, [&](int by, int bx) {
    double lo = 1e300, hi = -1e300;
    for (int y = by; y < by + kUiqmBlock; ++y) {
      for (int x = bx; x < bx + kUiqmBlock; ++x) {
        const double v = p[static_cast<std::size_t>(y) * w + x];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (lo > 0.0 && hi > 0.0) acc += std::log(hi / lo);
  });
  return 2.0 / (k1 * k2) * acc;
}

double uism(const Image& img) {
  constexpr std::array<double, 3> kWeights{0.299, 0.587, 0.114};
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto p = channel_plane(img, c, 255.0);
    auto edges = sobel_magnitude(p, img.height(), img.width());
    for (std::size_t i = 0; i < edges.size(); ++i) edges[i] *= p[i];
    s += kWeights[c] * eme(edges, img.height(), img.width());
  }
  return s;
}

double uiconm(const Image& img) {
  const int h = img.height(), w = img.width();
  const int k1 = w / kUiqmBlock, k2 = h / kUiqmBlock;
  std::vector<double> luma(img.pixels());
  for (std::size_t i = 0; i < luma.size(); ++i) {
    const float* p = img.data().data() + i * 3;
    luma[i] = 255.0 * (0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]);
  }
  double acc = 0.0;
  for_each_block(h, w, kUiqmBlock, [&](int by, int bx) {
    double lo = 1e300, hi = -1e300;
    for (int y = by; y < by + kUiqmBlock; ++y) {
      for (int x = bx; x < bx + kUiqmBlock; ++x) {
        const double v = luma[static_cast<std::size_t>(y) * w + x];
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    const double top = hi - lo, bottom = hi + lo;
    // Flat or black blocks carry no contrast.
    if (top > 0.0 && bottom > 0.0) {
      const double r = top / bottom;
      acc += r * std::log(r);
    }
  });
  return -acc / (k1 * k2);
}

double srgb_to_linear(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
  constexpr double d = 6.0 / 29.0;
  return t > d * d * d ? std::cbrt(t) : t / (3.0 * d * d) + 4.0 / 29.0;
}

struct Lab {
  double l, a, b;
};

Lab to_lab(float r8, float g8, float b8) {
  const double r = srgb_to_linear(r8), g = srgb_to_linear(g8), b = srgb_to_linear(b8);
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double fy = lab_f(y);
  if (r8 == g8 && g8 == b8) return {116.0 * fy - 16.0, 0.0, 0.0};
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / 0.95047), fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double percentile(const std::vector<double>& sorted, double p) {
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, sorted.size() - 1);
  return sorted[i] + (pos - static_cast<double>(i)) * (sorted[j] - sorted[i]);
}

double round4(double v) {
  const double r = std::round(v * 1e4) / 1e4;
  return r == 0.0 ? 0.0 : r;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double mse(const Image& a, const Image& b) {
  check_same(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = 255.0 * a.data()[i] - 255.0 * b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data().size());
}

double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / m));
}

double ssim_metric(const Image& a, const Image& b) {
  check_same(a, b, "ssim_metric");
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const auto x = channel_plane(a, c, 1.0), y = channel_plane(b, c, 1.0);
    s += detail::ssim_plane(x.data(), y.data(), a.height(), a.width());
  }
  return s / 3.0;
}

UiqmParts uiqm_parts(const Image& a) {
  require(a.height() >= kUiqmMinSize && a.width() >= kUiqmMinSize, ErrorCode::kTooSmall,
          "uiqm needs at least 16x16 pixels");
  UiqmParts p;
  p.uicm = uicm(a);
  p.uism = uism(a);
  p.uiconm = uiconm(a);
  p.score = 0.0282 * p.uicm + 0.2953 * p.uism + 3.5753 * p.uiconm;
  return p;
}

double uiqm(const Image& a) { return uiqm_parts(a).score; }

UciqeParts uciqe_parts(const Image& a) {
  UciqeParts p;
  const auto d = a.data();
  if (std::equal(d.begin() + 3, d.end(), d.begin())) {
    // A constant image has no colour or luminance variation to score.
    return p;
  }
  const std::size_t n = a.pixels();
  std::vector<double> lum(n), chroma(n);
  double sat = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Lab lab = to_lab(d[i * 3], d[i * 3 + 1], d[i * 3 + 2]);
    lum[i] = lab.l / 100.0;
    chroma[i] = std::hypot(lab.a, lab.b) / 100.0;
    const double denom = std::hypot(chroma[i], lum[i]);
    sat += denom > 0.0 ? chroma[i] / denom : 0.0;
  }
  const double mu_c = mean_of(chroma);
  double var_c = 0.0;
  for (double c : chroma) var_c += (c - mu_c) * (c - mu_c);
  p.sigma_chroma = std::sqrt(var_c / static_cast<double>(n));
  std::sort(lum.begin(), lum.end());
  p.contrast_luma = percentile(lum, 99.0) - percentile(lum, 1.0);
  p.mean_saturation = sat / static_cast<double>(n);
  p.score = 0.4680 * p.sigma_chroma + 0.2745 * p.contrast_luma + 0.2576 * p.mean_saturation;
  return p;
}

double uciqe(const Image& a) { return uciqe_parts(a).score; }

MetricSet MetricSet::parse(std::string_view list) {
  MetricSet s{false, false, false, false, false};
  std::istringstream is{std::string(list)};
  for (std::string name; std::getline(is, name, ',');) {
    if (name == "mse") s.mse = true;
    else if (name == "psnr") s.psnr = true;
    else if (name == "ssim") s.ssim = true;
    else if (name == "uiqm") s.uiqm = true;
    else if (name == "uciqe") s.uciqe = true;
    else fail(ErrorCode::kInvalidArgument, "unknown metric '" + name + "'");
  }
  return s;
}

std::string MetricSet::str() const {
  std::string out;
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!out.empty()) out += ",";
    out += name;
  };
  add(mse, "mse");
  add(psnr, "psnr");
  add(ssim, "ssim");
  add(uiqm, "uiqm");
  add(uciqe, "uciqe");
  return out;
}

ImageScores MetricReport::aggregate() const {
  ImageScores agg;
  agg.name = "mean";
  const auto fold = [&](std::optional<double> ImageScores::*field) {
    std::vector<double> v;
    for (const auto& img : images) {
      if (img.*field) v.push_back(*(img.*field));
    }
    if (!v.empty()) agg.*field = mean_of(v);
  };
  fold(&ImageScores::mse);
  fold(&ImageScores::psnr);
  fold(&ImageScores::ssim);
  fold(&ImageScores::uiqm);
  fold(&ImageScores::uciqe);
  return agg;
}

std::string MetricReport::to_json() const {
  using Json = nlohmann::ordered_json;
  const auto scores = [](const ImageScores& s) {
    Json j = Json::object();
    if (s.mse) j["mse"] = round4(*s.mse);
    if (s.psnr) j["psnr"] = round4(*s.psnr);
    if (s.ssim) j["ssim"] = round4(*s.ssim);
    if (s.uiqm) j["uiqm"] = round4(*s.uiqm);
    if (s.uciqe) j["uciqe"] = round4(*s.uciqe);
    return j;
  };
  Json doc;
  doc["images"] = Json::array();
  for (const auto& img : images) {
    Json j;
    j["name"] = img.name;
    j.update(scores(img));
    doc["images"].push_back(std::move(j));
  }
  doc["aggregate"] = scores(aggregate());
  doc["aggregate"]["count"] = images.size();
  doc["config"] = Json::object();
  for (const auto& [k, v] : config) doc["config"][k] = v;
  return doc.dump(2) + "\n";
}

MetricReport score_images(const std::vector<std::string>& names, const std::vector<Image>& preds,
                          const std::vector<Image>* refs, const MetricSet& metrics) {
  require(names.size() == preds.size(), ErrorCode::kShapeMismatch, "score_images: names and images differ in count");
  require(!metrics.needs_reference() || refs != nullptr, ErrorCode::kInvalidArgument,
          "metrics " + metrics.str() + " need reference images");
  require(refs == nullptr || refs->size() == preds.size(), ErrorCode::kShapeMismatch,
          "score_images: prediction and reference counts differ");
  MetricReport report;
  bool partial = false;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ImageScores s;
    s.name = names[i];
    const Image& p = preds[i];
    if (refs) {
      const Image& r = (*refs)[i];
      if (metrics.mse) s.mse = mse(p, r);
      if (metrics.psnr) s.psnr = psnr(p, r);
      if (metrics.ssim) s.ssim = ssim_metric(p, r);
    }
    if (metrics.uiqm) {
      s.uiqm = uiqm(p);
      partial = partial || p.height() % kUiqmBlock != 0 || p.width() % kUiqmBlock != 0;
    }
    if (metrics.uciqe) s.uciqe = uciqe(p);
    report.images.push_back(std::move(s));
  }
  report.config["metrics"] = metrics.str();
  report.config["mse_scale"] = "0-255";
  report.config["psnr_cap_db"] = "100";
  report.config["ssim_window"] = "11x11 gaussian sigma 1.5, valid region";
  if (metrics.uiqm) {
    report.config["uiqm_block"] = std::to_string(kUiqmBlock);
    report.config["uiqm_partial_blocks"] = partial ? "truncated" : "none";
  }
  report.config["uciqe_color_space"] = "CIELAB D65";
  return report;
}

}  // namespace atdc
