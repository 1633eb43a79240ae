// SPDX-License-Identifier: Apache-2.0
#include "mssf/nn/blocks.hpp"

namespace mssf::nn {

template <typename T>
Upsampler<T>::Upsampler(ParamStore<T>& store, const std::string& prefix, std::size_t channels, std::size_t scale)
    : scale_(scale) {
  if (scale != 2 && scale != 4) throw ConfigError("upsampler: scale must be 2 or 4, got " + std::to_string(scale));
  conv_ = Conv<T>(store, prefix, channels, 3 * scale * scale, 3);
}

template <typename T>
Tensor<T> Upsampler<T>::operator()(const Tensor<T>& x) const {
  return pixel_shuffle(conv_(x), scale_);
}

template class Upsampler<float>;
template class Upsampler<double>;

}  // namespace mssf::nn
