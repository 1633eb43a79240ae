// SPDX-License-Identifier: Apache-2.0
#include "mssf/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "mssf/autograd.hpp"
#include "mssf/ops.hpp"

namespace mssf {

using cd = std::complex<double>;
using detail::check_finite;
using detail::record;
using detail::should_record;
using detail::wants_grad;

namespace fft {
namespace {

struct PlanKey {
  std::size_t n;
  bool inverse;
  bool operator==(const PlanKey&) const = default;
};

struct PlanKeyHash {
  std::size_t operator()(const PlanKey& k) const { return k.n * 2 + (k.inverse ? 1 : 0); }
};

// FFTW's planner is not re-entrant; execution with new-array calls is.
std::mutex planner_mutex;

fftw_plan plan_for(std::size_t n, bool inverse) {
  thread_local std::unordered_map<PlanKey, fftw_plan, PlanKeyHash> cache;
  const PlanKey key{n, inverse};
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  std::lock_guard lock(planner_mutex);
  std::vector<fftw_complex> scratch(n);
  fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), scratch.data(), scratch.data(),
                                    inverse ? FFTW_BACKWARD : FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plan) throw NumericError("fft: could not plan a transform of length " + std::to_string(n));
  cache.emplace(key, plan);
  return plan;
}

}  // namespace

void transform(std::span<cd> data, bool inverse) {
  if (data.size() <= 1) return;
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan_for(data.size(), inverse), buf, buf);
}

}  // namespace fft

namespace {

std::size_t half_width(std::size_t w) { return w / 2 + 1; }

double column_weight(std::size_t l, std::size_t w) {
  return (l == 0 || (w % 2 == 0 && l == w / 2)) ? 1.0 : 2.0;
}

// Bins equal to their own conjugate mirror; only their real part reaches a
// real output.
bool self_conjugate(std::size_t k, std::size_t l, std::size_t h, std::size_t w) {
  const bool row = k == 0 || (h % 2 == 0 && k == h / 2);
  const bool col = l == 0 || (w % 2 == 0 && l == w / 2);
  return row && col;
}

// Forward real 2-D transform of one H x W plane into an H x Wr half spectrum.
template <typename T>
void plane_rfft2(const T* x, std::size_t h, std::size_t w, std::vector<cd>& spec) {
  const std::size_t wr = half_width(w);
  spec.assign(h * wr, cd(0));
  std::vector<cd> row(w), col(h);
  for (std::size_t m = 0; m < h; ++m) {
    for (std::size_t n = 0; n < w; ++n) row[n] = cd(static_cast<double>(x[m * w + n]), 0.0);
    fft::transform(row, false);
    for (std::size_t l = 0; l < wr; ++l) spec[m * wr + l] = row[l];
  }
  for (std::size_t l = 0; l < wr; ++l) {
    for (std::size_t m = 0; m < h; ++m) col[m] = spec[m * wr + l];
    fft::transform(col, false);
    for (std::size_t k = 0; k < h; ++k) spec[k * wr + l] = col[k];
  }
}

// y[m,n] = scale * Re( sum_{k, l < Wr} weight(l) X[k,l] exp(+2 pi i (k m / H + l n / W)) )
template <typename T>
void plane_half_to_real(std::vector<cd> spec, std::size_t h, std::size_t w, bool weighted, double scale,
                        T* y) {
  const std::size_t wr = half_width(w);
  std::vector<cd> col(h), row(w);
  for (std::size_t l = 0; l < wr; ++l) {
    for (std::size_t k = 0; k < h; ++k) col[k] = spec[k * wr + l];
    fft::transform(col, true);
    for (std::size_t m = 0; m < h; ++m) spec[m * wr + l] = col[m];
  }
  for (std::size_t m = 0; m < h; ++m) {
    for (std::size_t n = 0; n < w; ++n) row[n] = cd(0);
    for (std::size_t l = 0; l < wr; ++l) row[l] = spec[m * wr + l] * (weighted ? column_weight(l, w) : 1.0);
    fft::transform(row, true);
    for (std::size_t n = 0; n < w; ++n) y[m * w + n] = static_cast<T>(scale * row[n].real());
  }
}

}  // namespace

template <typename T>
Tensor<T> rfft2_packed(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("rfft2: expected [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h == 0 || w == 0) throw DimensionError("rfft2: zero-sized spatial extent " + shape_str(x.shape()));
  const std::size_t wr = half_width(w), plane = h * wr;
  Tensor<T> out({n, 2 * c, h, wr});
  {
    auto o = out.mutable_data();
    auto d = x.data();
    std::vector<cd> spec;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        plane_rfft2(d.data() + (b * c + ch) * h * w, h, w, spec);
        T* re = o.data() + (b * 2 * c + ch) * plane;
        T* im = o.data() + (b * 2 * c + c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          re[i] = static_cast<T>(spec[i].real());
          im[i] = static_cast<T>(spec[i].imag());
        }
      }
  }
  check_finite(out, "rfft2");
  if (should_record({&x})) {
    auto xi = x.impl_ptr();
    record(out, "rfft2", {&x}, [xi, n, c, h, w, wr, plane](std::span<const T> g) {
      auto gx = xi->grad_buffer();
      std::vector<cd> spec(plane);
      std::vector<T> tmp(h * w);
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T* gr = g.data() + (b * 2 * c + ch) * plane;
          const T* gi = g.data() + (b * 2 * c + c + ch) * plane;
          for (std::size_t i = 0; i < plane; ++i) spec[i] = cd(gr[i], gi[i]);
          plane_half_to_real(spec, h, w, false, 1.0, tmp.data());
          T* dst = gx.data() + (b * c + ch) * h * w;
          for (std::size_t i = 0; i < h * w; ++i) dst[i] += tmp[i];
        }
      (void)wr;
    });
  }
  return out;
}

template <typename T>
Tensor<T> irfft2_packed(const Tensor<T>& packed, std::size_t height, std::size_t width) {
  if (packed.rank() != 4)
    throw DimensionError("irfft2: expected [N,2C,H,W/2+1], got " + shape_str(packed.shape()));
  if (height == 0 || width == 0) throw DimensionError("irfft2: zero-sized spatial extent");
  const std::size_t n = packed.dim(0), c2 = packed.dim(1), h = height, w = width;
  const std::size_t wr = half_width(w), plane = h * wr;
  if (c2 % 2 != 0 || packed.dim(2) != h || packed.dim(3) != wr)
    throw DimensionError("irfft2: spectrum " + shape_str(packed.shape()) + " inconsistent with declared extents " +
                         std::to_string(h) + "x" + std::to_string(w));
  const std::size_t c = c2 / 2;
  const double inv_hw = 1.0 / static_cast<double>(h * w);
  Tensor<T> out({n, c, h, w});
  {
    auto o = out.mutable_data();
    auto d = packed.data();
    std::vector<cd> spec(plane);
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T* re = d.data() + (b * c2 + ch) * plane;
        const T* im = d.data() + (b * c2 + c + ch) * plane;
        for (std::size_t i = 0; i < plane; ++i)
          spec[i] = cd(re[i], self_conjugate(i / wr, i % wr, h, w) ? 0.0 : static_cast<double>(im[i]));
        plane_half_to_real(spec, h, w, true, inv_hw, o.data() + (b * c + ch) * h * w);
      }
  }
  check_finite(out, "irfft2");
  if (should_record({&packed})) {
    auto pi = packed.impl_ptr();
    record(out, "irfft2", {&packed}, [pi, n, c, c2, h, w, wr, plane, inv_hw](std::span<const T> g) {
      auto gp = pi->grad_buffer();
      std::vector<cd> spec;
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch) {
          plane_rfft2(g.data() + (b * c + ch) * h * w, h, w, spec);
          T* gr = gp.data() + (b * c2 + ch) * plane;
          T* gi = gp.data() + (b * c2 + c + ch) * plane;
          for (std::size_t k = 0; k < h; ++k)
            for (std::size_t l = 0; l < wr; ++l) {
              const double f = column_weight(l, w) * inv_hw;
              gr[k * wr + l] += static_cast<T>(f * spec[k * wr + l].real());
              if (!self_conjugate(k, l, h, w)) gi[k * wr + l] += static_cast<T>(f * spec[k * wr + l].imag());
            }
        }
    });
  }
  return out;
}

template <typename T>
ComplexSpectrum<T> rfft2(const Tensor<T>& x) {
  auto packed = rfft2_packed(x);
  const std::size_t c = x.dim(1);
  return {slice_channels(packed, 0, c), slice_channels(packed, c, 2 * c), x.dim(2), x.dim(3)};
}

template <typename T>
Tensor<T> irfft2(const ComplexSpectrum<T>& spectrum, std::size_t height, std::size_t width) {
  if (spectrum.real.shape() != spectrum.imag.shape())
    throw DimensionError("irfft2: real part " + shape_str(spectrum.real.shape()) + " and imaginary part " +
                         shape_str(spectrum.imag.shape()) + " differ");
  if ((spectrum.height && spectrum.height != height) || (spectrum.width && spectrum.width != width))
    throw DimensionError("irfft2: declared extents " + std::to_string(height) + "x" + std::to_string(width) +
                         " differ from the transformed signal " + std::to_string(spectrum.height) + "x" +
                         std::to_string(spectrum.width));
  return irfft2_packed(concat_channels({spectrum.real, spectrum.imag}), height, width);
}

#define MSSF_INSTANTIATE(T)                                                          \
  template Tensor<T> rfft2_packed(const Tensor<T>&);                                 \
  template Tensor<T> irfft2_packed(const Tensor<T>&, std::size_t, std::size_t);      \
  template ComplexSpectrum<T> rfft2(const Tensor<T>&);                               \
  template Tensor<T> irfft2(const ComplexSpectrum<T>&, std::size_t, std::size_t);

MSSF_INSTANTIATE(float)
MSSF_INSTANTIATE(double)
#undef MSSF_INSTANTIATE

}  // namespace mssf
