// SPDX-License-Identifier: Apache-2.0
#include "mssf/nn/layers.hpp"

#include <cmath>

namespace mssf::nn {

std::size_t expanded_width(std::size_t channels, double expansion) {
  if (expansion <= 0.0) throw ConfigError("expansion factor must be positive");
  const auto raw = static_cast<std::size_t>(std::ceil(expansion * static_cast<double>(channels) - 1e-9));
  return std::max<std::size_t>(4, (raw + 3) / 4 * 4);
}

template <typename T>
Conv<T>::Conv(ParamStore<T>& store, const std::string& prefix, std::size_t in_ch, std::size_t out_ch,
              std::size_t k, std::size_t g)
    : in(in_ch), out(out_ch), kernel(k), groups(g) {
  if (k % 2 == 0) throw ConfigError(prefix + ": kernel size must be odd, got " + std::to_string(k));
  if (g == 0 || in_ch % g || out_ch % g)
    throw ConfigError(prefix + ": groups " + std::to_string(g) + " must divide " + std::to_string(in_ch) + " and " +
                      std::to_string(out_ch));
  const std::size_t fan_in = in_ch / g * k * k;
  weight = store.add(prefix + ".weight", {out_ch, in_ch / g, k, k}, Init::kaiming_normal, fan_in);
  bias = store.add(prefix + ".bias", {out_ch}, Init::zeros);
}

template <typename T>
Tensor<T> Conv<T>::operator()(const Tensor<T>& x) const {
  return conv2d(x, weight, bias, {1, (kernel - 1) / 2, groups});
}

template <typename T>
Norm<T>::Norm(ParamStore<T>& store, const std::string& prefix, std::size_t channels) {
  gamma = store.add(prefix + ".gamma", {channels}, Init::ones);
  beta = store.add(prefix + ".beta", {channels}, Init::zeros);
}

template <typename T>
Tensor<T> simple_gate(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("simple_gate: expected [N,C,H,W], got " + shape_str(x.shape()));
  const std::size_t c = x.dim(1);
  if (c % 2) throw ConfigError("simple_gate: channel count " + std::to_string(c) + " is odd");
  return mul(slice_channels(x, 0, c / 2), slice_channels(x, c / 2, c));
}

template <typename T>
Tensor<T> sca(const Tensor<T>& x, const Conv<T>& gate) {
  return mul_channels(x, gate(global_avg_pool(x)));
}

#define MSSF_INSTANTIATE(T)                                    \
  template struct Conv<T>;                                     \
  template struct Norm<T>;                                     \
  template Tensor<T> simple_gate(const Tensor<T>&);            \
  template Tensor<T> sca(const Tensor<T>&, const Conv<T>&);

MSSF_INSTANTIATE(float)
MSSF_INSTANTIATE(double)
#undef MSSF_INSTANTIATE

}  // namespace mssf::nn
