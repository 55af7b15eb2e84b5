// Copyright 2026 The atdc Authors
// SPDX-License-Identifier: Apache-2.0

// Full-reference (MSE, PSNR, SSIM) and no-reference (UIQM, UCIQE) scores.

#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "atdc/image.hpp"

namespace atdc {

inline constexpr double kPsnrCap = 100.0;
inline constexpr int kUiqmBlock = 8;
inline constexpr int kUiqmMinSize = 16;

/// Mean squared error on the 0-255 scale.
double mse(const Image& a, const Image& b);
/// 10 log10(255^2 / mse), capped at kPsnrCap.
double psnr(const Image& a, const Image& b);
/// Mean SSIM over channels, same window and constants as ssim_loss.
double ssim_metric(const Image& a, const Image& b);

struct UiqmParts {
  double uicm = 0.0;    // colourfulness
  double uism = 0.0;    // sharpness
  double uiconm = 0.0;  // contrast
  double score = 0.0;
};

UiqmParts uiqm_parts(const Image& a);
double uiqm(const Image& a);

struct UciqeParts {
  double sigma_chroma = 0.0;
  double contrast_luma = 0.0;
  double mean_saturation = 0.0;
  double score = 0.0;
};

UciqeParts uciqe_parts(const Image& a);
double uciqe(const Image& a);

struct MetricSet {
  bool mse = true;
  bool psnr = true;
  bool ssim = true;
  bool uiqm = true;
  bool uciqe = true;

  /// Comma-separated names, e.g. "psnr,ssim,uiqm". InvalidArgument on unknown names.
  static MetricSet parse(std::string_view list);
  bool needs_reference() const { return mse || psnr || ssim; }
  std::string str() const;
};

struct ImageScores {
  std::string name;
  std::optional<double> mse, psnr, ssim, uiqm, uciqe;
};

struct MetricReport {
  std::vector<ImageScores> images;
  std::map<std::string, std::string> config;

  /// Per-metric arithmetic mean over the images that carry it.
  ImageScores aggregate() const;
  /// {"images":[...],"aggregate":{...},"config":{...}}, scores rounded to 4 places.
  std::string to_json() const;
};

/// Scores predictions, optionally against references of the same names.
/// A reference-based metric without references is InvalidArgument.
MetricReport score_images(const std::vector<std::string>& names, const std::vector<Image>& preds,
                          const std::vector<Image>* refs, const MetricSet& metrics);

}  // namespace atdc
