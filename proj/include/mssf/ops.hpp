// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mssf/tensor.hpp"

// Differentiable primitives. Feature maps are [batch, channels, height, width].
// Every op checks its output for non-finite values and throws NumericError.

namespace mssf {

// --- elementwise -----------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <typename T>
Tensor<T> abs(const Tensor<T>& x);

/// x[n,c,h,w] * s[c] (s numel C) or x[n,c,h,w] * s[n,c] (s numel N*C).
template <typename T>
Tensor<T> mul_channels(const Tensor<T>& x, const Tensor<T>& s);

// --- reductions ------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);
/// [N,C,H,W] -> [N,C,1,1], arithmetic mean over H*W.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

// --- convolution / normalization -------------------------------------------

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

/// Cross-correlation. weight is [Cout, Cin/groups, kh, kw]; bias (optional,
/// pass an undefined tensor to skip) is [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 Conv2dOptions opts = {});

/// Normalizes across channels at every (n, h, w), then applies gamma[c], beta[c].
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-6));

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

// --- layout ----------------------------------------------------------------

/// [N, C*s*s, H, W] -> [N, C, s*H, s*W];
/// out[n, c, h*s+i, w*s+j] = in[n, c*s*s + i*s + j, h, w].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t s);
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t s);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> concat_channels(std::initializer_list<Tensor<T>> parts) {
  std::vector<Tensor<T>> v(parts);
  return concat_channels(std::span<const Tensor<T>>(v));
}
/// Channels [begin, end) of a rank-4 tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::span<const std::size_t> order);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, std::initializer_list<std::size_t> order) {
  std::vector<std::size_t> v(order);
  return permute(x, std::span<const std::size_t>(v));
}

/// Batched matrix product: a [B,M,K] x b [B,K,N] -> [B,M,N]; with
/// `transpose_b`, b is [B,N,K] and used transposed.
template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

/// Bilinear resize by integer factor with half-pixel centers
/// (src = (dst + 0.5) / s - 0.5, clamped to the image).
template <typename T>
Tensor<T> bilinear_upsample(const Tensor<T>& x, std::size_t s);

}  // namespace mssf
