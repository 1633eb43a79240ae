// SPDX-License-Identifier: Apache-2.0
// Shared helpers and independent reference implementations for the tests.
// Nothing here calls into the code paths it is used to check.
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <string>
#include <numbers>
#include <random>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mssf_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(shape_numel(shape));
  for (auto& e : v) e = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.numel(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i])));
  return m;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

/// Six-nested-loop cross-correlation.
inline std::vector<double> naive_conv2d(const std::vector<double>& x, std::size_t n, std::size_t cin,
                                        std::size_t h, std::size_t w, const std::vector<double>& wt,
                                        std::size_t cout, std::size_t k, const std::vector<double>& bias,
                                        std::size_t stride, std::size_t pad, std::size_t groups,
                                        std::size_t& oh, std::size_t& ow) {
  oh = (h + 2 * pad - k) / stride + 1;
  ow = (w + 2 * pad - k) / stride + 1;
  const std::size_t cig = cin / groups, cog = cout / groups;
  std::vector<double> out(n * cout * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < cout; ++oc)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) {
          double acc = bias.empty() ? 0.0 : bias[oc];
          const std::size_t g = oc / cog;
          for (std::size_t icl = 0; icl < cig; ++icl)
            for (std::size_t ky = 0; ky < k; ++ky)
              for (std::size_t kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                const long ix = static_cast<long>(xo * stride + kx) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                const std::size_t ic = g * cig + icl;
                acc += wt[((oc * cig + icl) * k + ky) * k + kx] *
                       x[((b * cin + ic) * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
              }
          out[((b * cout + oc) * oh + y) * ow + xo] = acc;
        }
  return out;
}

/// O(H^2 W^2) 2-D DFT of one real plane; returns the full H x W spectrum.
inline std::vector<std::complex<double>> dense_dft2(const double* x, std::size_t h, std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t k = 0; k < h; ++k)
    for (std::size_t l = 0; l < w; ++l) {
      std::complex<double> acc = 0;
      for (std::size_t m = 0; m < h; ++m)
        for (std::size_t n = 0; n < w; ++n) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>(k * m) / static_cast<double>(h) +
                              static_cast<double>(l * n) / static_cast<double>(w));
          acc += x[m * w + n] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[k * w + l] = acc;
    }
  return out;
}

/// Inverse of dense_dft2 for a full spectrum (normalized, real part).
inline std::vector<double> dense_idft2_real(const std::vector<std::complex<double>>& X, std::size_t h,
                                            std::size_t w) {
  std::vector<double> out(h * w);
  for (std::size_t m = 0; m < h; ++m)
    for (std::size_t n = 0; n < w; ++n) {
      std::complex<double> acc = 0;
      for (std::size_t k = 0; k < h; ++k)
        for (std::size_t l = 0; l < w; ++l) {
          const double ang = 2.0 * std::numbers::pi *
                             (static_cast<double>(k * m) / static_cast<double>(h) +
                              static_cast<double>(l * n) / static_cast<double>(w));
          acc += X[k * w + l] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      out[m * w + n] = acc.real() / static_cast<double>(h * w);
    }
  return out;
}

// Direct 2-D window SSIM with two-pass moments, one position at a time.
inline double naive_ssim(const TensorF& a, const TensorF& b) {
  const std::size_t c = a.dim(0), h = a.dim(1), w = a.dim(2), k = 11;
  std::vector<double> win(k * k);
  double total = 0;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const double dy = double(i) - 5.0, dx = double(j) - 5.0;
      win[i * k + j] = std::exp(-(dx * dx + dy * dy) / (2 * 1.5 * 1.5));
      total += win[i * k + j];
    }
  for (auto& v : win) v /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0;
  for (std::size_t ch = 0; ch < c; ++ch) {
    double chan = 0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + k <= h; ++y)
      for (std::size_t x = 0; x + k <= w; ++x) {
        auto px = [&](const TensorF& t, std::size_t i, std::size_t j) {
          return double(t.data()[(ch * h + y + i) * w + x + j]);
        };
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            mx += win[i * k + j] * px(a, i, j);
            my += win[i * k + j] * px(b, i, j);
          }
        double vx = 0, vy = 0, cov = 0;
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) {
            const double da = px(a, i, j) - mx, db = px(b, i, j) - my;
            vx += win[i * k + j] * da * da;
            vy += win[i * k + j] * db * db;
            cov += win[i * k + j] * da * db;
          }
        chan += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    acc += chan / double(count);
  }
  return acc / double(c);
}

}  // namespace mssf::testing
