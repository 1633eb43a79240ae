// SPDX-License-Identifier: Apache-2.0
#include "mssf/train/metrics.hpp"

#include <cmath>
#include <vector>

namespace mssf::train {

namespace {

void require_same(const TensorF& a, const TensorF& b, const char* what) {
  if (a.shape() != b.shape())
    throw InputError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// Valid-mode separable filtering of one H x W plane.
std::vector<double> filter_valid(const std::vector<double>& plane, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
  const std::size_t k = taps.size(), oh = h - k + 1, ow = w - k + 1;
  std::vector<double> rows(h * ow);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * plane[y * w + x + t];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) acc += taps[t] * rows[(y + t) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace

double psnr(const TensorF& ref, const TensorF& test, double peak) {
  require_same(ref, test, "psnr");
  if (ref.numel() == 0) throw InputError("psnr: empty images");
  double sq = 0.0;
  auto a = ref.data(), b = test.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sq += d * d;
  }
  if (sq == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(peak * peak / (sq / static_cast<double>(a.size())));
}

std::vector<double> gaussian_taps(std::size_t size, double sigma) {
  std::vector<double> g(size);
  const double mid = (static_cast<double>(size) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double d = static_cast<double>(i) - mid;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  return g;
}

double ssim(const TensorF& ref, const TensorF& test, const SsimOptions& options) {
  require_same(ref, test, "ssim");
  if (ref.rank() != 3) throw DimensionError("ssim: expected [C,H,W], got " + shape_str(ref.shape()));
  const std::size_t c = ref.dim(0), h = ref.dim(1), w = ref.dim(2), k = options.window;
  if (h < k || w < k)
    throw InputError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) + " is smaller than the " +
                     std::to_string(k) + "x" + std::to_string(k) + " window");
  const auto taps = gaussian_taps(k, options.sigma);
  const double c1 = (options.k1 * options.peak) * (options.k1 * options.peak);
  const double c2 = (options.k2 * options.peak) * (options.k2 * options.peak);
  const std::size_t plane = h * w;
  double total = 0.0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = ref.data()[ch * plane + i];
      y[i] = test.data()[ch * plane + i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, taps), my = filter_valid(y, h, w, taps);
    const auto exx = filter_valid(xx, h, w, taps), eyy = filter_valid(yy, h, w, taps),
               exy = filter_valid(xy, h, w, taps);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = exx[i] - mx[i] * mx[i], vy = eyy[i] - my[i] * my[i], cov = exy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / static_cast<double>(c);
}

}  // namespace mssf::train
