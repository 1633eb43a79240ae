// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <span>

#include "mssf/tensor.hpp"

namespace mssf {

/// Half spectrum of a real 2-D signal, per channel:
/// real/imag are [N, C, H, W/2 + 1]. `height`/`width` record the spatial
/// extents of the signal it came from.
template <typename T>
struct ComplexSpectrum {
  Tensor<T> real;
  Tensor<T> imag;
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Real-input 2-D DFT over (H, W) of every channel, unnormalized:
/// X[k,l] = sum_{m,n} x[m,n] exp(-2 pi i (k m / H + l n / W)), 0 <= l <= W/2.
template <typename T>
ComplexSpectrum<T> rfft2(const Tensor<T>& x);

/// Inverse of rfft2. `height`/`width` resolve which signal length produced
/// the half spectrum. Computed as the real part of the normalized inverse
/// 2-D transform of the half spectrum with columns 0 < l < W/2 weighted by 2,
/// which is a well-defined linear map for any input and the exact inverse
/// for spectra that came from a real signal. Imaginary parts of bins that are
/// their own conjugate mirror (DC, and Nyquist rows/columns for even extents)
/// are ignored, so their gradient is exactly zero.
template <typename T>
Tensor<T> irfft2(const ComplexSpectrum<T>& spectrum, std::size_t height, std::size_t width);

/// Channel-packed forms used inside networks: real parts in channels [0, C),
/// imaginary parts in [C, 2C) of a [N, 2C, H, W/2 + 1] tensor.
template <typename T>
Tensor<T> rfft2_packed(const Tensor<T>& x);
template <typename T>
Tensor<T> irfft2_packed(const Tensor<T>& packed, std::size_t height, std::size_t width);

namespace fft {

/// In-place complex DFT of any length. `inverse` flips the exponent sign; no
/// normalization is applied in either direction. Backed by FFTW with
/// estimate-mode plans, so results do not depend on timing measurements.
void transform(std::span<std::complex<double>> data, bool inverse);

}  // namespace fft
}  // namespace mssf
