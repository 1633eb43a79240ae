// SPDX-License-Identifier: Apache-2.0
#include "mssf/data/resize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mssf::data {

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace {

struct Taps {
  std::vector<std::size_t> index;  // per output: `width` source indices
  std::vector<double> weight;
  std::size_t width = 0;
};

Taps make_taps(std::size_t in, std::size_t out) {
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const double stretch = scale < 1.0 ? 1.0 / scale : 1.0;
  const double support = 2.0 * stretch;
  Taps t;
  t.width = static_cast<std::size_t>(std::ceil(2.0 * support)) + 2;
  t.index.resize(out * t.width);
  t.weight.resize(out * t.width);
  for (std::size_t o = 0; o < out; ++o) {
    const double center = (static_cast<double>(o) + 0.5) / scale - 0.5;
    const auto first = static_cast<long>(std::floor(center - support));
    double total = 0.0;
    for (std::size_t k = 0; k < t.width; ++k) {
      const long src = first + static_cast<long>(k);
      const double w = cubic_kernel((center - static_cast<double>(src)) / stretch);
      t.index[o * t.width + k] = static_cast<std::size_t>(std::clamp<long>(src, 0, static_cast<long>(in) - 1));
      t.weight[o * t.width + k] = w;
      total += w;
    }
    for (std::size_t k = 0; k < t.width; ++k) t.weight[o * t.width + k] /= total;
  }
  return t;
}

}  // namespace

TensorF bicubic_resize(const TensorF& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 3) throw DimensionError("bicubic_resize: expected [C,H,W], got " + shape_str(image.shape()));
  if (out_h == 0 || out_w == 0)
    throw InputError("bicubic_resize: degenerate output size " + std::to_string(out_h) + "x" + std::to_string(out_w));
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h == 0 || w == 0) throw InputError("bicubic_resize: empty input image");
  const Taps tx = make_taps(w, out_w), ty = make_taps(h, out_h);
  std::vector<double> rows(c * h * out_w);
  auto src = image.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y) {
      const float* in = src.data() + (ch * h + y) * w;
      double* dst = rows.data() + (ch * h + y) * out_w;
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tx.width; ++k)
          acc += tx.weight[x * tx.width + k] * static_cast<double>(in[tx.index[x * tx.width + k]]);
        dst[x] = acc;
      }
    }
  TensorF out({c, out_h, out_w});
  auto o = out.mutable_data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < out_h; ++y)
      for (std::size_t x = 0; x < out_w; ++x) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ty.width; ++k)
          acc += ty.weight[y * ty.width + k] * rows[(ch * h + ty.index[y * ty.width + k]) * out_w + x];
        o[(ch * out_h + y) * out_w + x] = static_cast<float>(acc);
      }
  return out;
}

TensorF bicubic_rescale(const TensorF& image, std::size_t num, std::size_t den) {
  if (num == 0 || den == 0) throw InputError("bicubic_rescale: factor must be positive");
  if (image.rank() != 3) throw DimensionError("bicubic_rescale: expected [C,H,W], got " + shape_str(image.shape()));
  return bicubic_resize(image, image.dim(1) * num / den, image.dim(2) * num / den);
}

}  // namespace mssf::data
