#pragma once

#include <string>
#include <vector>

#include "hffn/image.hpp"

namespace hffn {

/// 10*log10(1/MSE) over all channels after removing `shave` border pixels.
/// Identical images give +infinity.
double psnr(const Image& a, const Image& b, int shave);

/// Single-scale SSIM on single-channel images: 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03, dynamic range 1, averaged over all
/// windows that fit inside the image.
double ssim(const Image& a, const Image& b);

/// Y-channel PSNR/SSIM of an SR result against its HR reference with
/// `shave` border pixels removed before both metrics.
struct ImageScore {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};
ImageScore score_y(const std::string& name, const Image& sr, const Image& hr, int shave);

struct EvalReport {
  std::string dataset;
  int scale = 1;
  std::vector<ImageScore> per_image;  // sorted by name
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;

  /// Sorts per_image by name and recomputes the means.
  void finalize();
  /// {dataset, scale, per_image: [{name, psnr, ssim}], mean_psnr, mean_ssim};
  /// infinite PSNR values are written as the string "inf".
  std::string to_json() const;
  std::string to_text() const;
};

}  // namespace hffn
