// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "mssf/tensor.hpp"

namespace mssf::data {

/// Separable bicubic resampling of a [C,H,W] image (Keys kernel, a = -0.5)
/// with half-pixel centers and edge clamping. When shrinking along an axis
/// the kernel is stretched by the shrink factor so it also low-pass filters.
/// Weights are normalized per output sample, so constants stay constant.
TensorF bicubic_resize(const TensorF& image, std::size_t out_h, std::size_t out_w);

/// Resize by a rational factor num/den on both axes; output extents are
/// floor(extent * num / den).
TensorF bicubic_rescale(const TensorF& image, std::size_t num, std::size_t den);

/// Keys cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

}  // namespace mssf::data
