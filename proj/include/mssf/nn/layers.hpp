// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include "mssf/nn/param_store.hpp"
#include "mssf/ops.hpp"

namespace mssf::nn {

/// Rounds e*c up to a multiple of 4 so the width survives two channel halvings.
std::size_t expanded_width(std::size_t channels, double expansion);

/// "Same"-padded stride-1 convolution with bias. Registers
/// `<prefix>.weight` and `<prefix>.bias`.
template <typename T>
struct Conv {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t in = 0, out = 0, kernel = 1, groups = 1;

  Conv() = default;
  Conv(ParamStore<T>& store, const std::string& prefix, std::size_t in, std::size_t out, std::size_t kernel = 1,
       std::size_t groups = 1);
  Tensor<T> operator()(const Tensor<T>& x) const;
};

/// Depth-wise convolution: one k x k filter per channel.
template <typename T>
Conv<T> depthwise(ParamStore<T>& store, const std::string& prefix, std::size_t channels, std::size_t kernel) {
  return Conv<T>(store, prefix, channels, channels, kernel, channels);
}

/// Channel layer norm. Registers `<prefix>.gamma` (ones) and `<prefix>.beta`.
template <typename T>
struct Norm {
  Tensor<T> gamma;
  Tensor<T> beta;

  Norm() = default;
  Norm(ParamStore<T>& store, const std::string& prefix, std::size_t channels);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, T(1e-6)); }
};

/// First channel half times second channel half.
template <typename T>
Tensor<T> simple_gate(const Tensor<T>& x);

/// x scaled per channel by a 1x1 conv of its global average.
template <typename T>
Tensor<T> sca(const Tensor<T>& x, const Conv<T>& gate);

}  // namespace mssf::nn
