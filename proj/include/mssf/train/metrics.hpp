// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>

#include "mssf/tensor.hpp"

namespace mssf::train {

/// Returned by psnr() for identical inputs.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 10 log10(peak^2 / MSE) over every element.
double psnr(const TensorF& ref, const TensorF& test, double peak = 1.0);

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Single-scale SSIM of two [C,H,W] images: Gaussian-weighted local
/// statistics at every position where the window fits, averaged per channel
/// and then across channels. Both inputs go through the same arithmetic, so
/// ssim(x, x) is exactly 1.
double ssim(const TensorF& ref, const TensorF& test, const SsimOptions& options = {});

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
std::vector<double> gaussian_taps(std::size_t size, double sigma);

}  // namespace mssf::train
