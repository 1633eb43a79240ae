// SPDX-License-Identifier: Apache-2.0
#include "mssf/fft.hpp"
#include "mssf/nn/blocks.hpp"

namespace mssf::nn {

template <typename T>
FourierConvBlock<T>::FourierConvBlock(ParamStore<T>& store, const std::string& prefix, std::size_t channels,
                                      double expansion)
    : channels_(channels) {
  const std::size_t wide = expanded_width(channels, expansion);
  const std::size_t gated = wide / 2;
  local_expand_ = Conv<T>(store, prefix + ".local.expand", channels, wide);
  local_norm_ = Norm<T>(store, prefix + ".local.norm", wide);
  local_project_ = Conv<T>(store, prefix + ".local.project", gated, channels);
  global_expand_ = Conv<T>(store, prefix + ".global.expand", channels, wide);
  global_norm_ = Norm<T>(store, prefix + ".global.norm", wide);
  // Real and imaginary parts travel as 2*gated channels; expand x2 for the gate.
  spectral_conv_ = Conv<T>(store, prefix + ".global.spectral_conv", 2 * gated, 4 * gated);
  spectral_norm_ = Norm<T>(store, prefix + ".global.spectral_norm", 4 * gated);
  global_project_ = Conv<T>(store, prefix + ".global.project", gated, channels);
  fuse_ = Conv<T>(store, prefix + ".fuse", 2 * channels, channels);
}

template <typename T>
Tensor<T> FourierConvBlock<T>::local_branch(const Tensor<T>& x) const {
  return add(local_project_(simple_gate(local_norm_(local_expand_(x)))), x);
}

template <typename T>
Tensor<T> FourierConvBlock<T>::global_branch(const Tensor<T>& x) const {
  const auto spatial = simple_gate(global_norm_(global_expand_(x)));
  const auto spectrum = rfft2_packed(spatial);
  const auto filtered = simple_gate(spectral_norm_(spectral_conv_(spectrum)));
  const auto back = irfft2_packed(filtered, x.dim(2), x.dim(3));
  return global_project_(add(back, spatial));
}

template <typename T>
Tensor<T> FourierConvBlock<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != channels_)
    throw ConfigError("ffcb: expected " + std::to_string(channels_) + " channels, got input " + shape_str(x.shape()));
  if (x.dim(2) == 0 || x.dim(3) == 0) throw DimensionError("ffcb: zero-sized feature map " + shape_str(x.shape()));
  return fuse_(concat_channels({local_branch(x), global_branch(x)}));
}

template class FourierConvBlock<float>;
template class FourierConvBlock<double>;

}  // namespace mssf::nn
