// SPDX-License-Identifier: Apache-2.0
#include "mssf/nn/blocks.hpp"

namespace mssf::nn {

void MsbBranchSpec::validate() const {
  if (kernels.empty()) throw ConfigError("msb: at least one branch kernel is required");
  for (auto k : kernels)
    if (k < 3 || k % 2 == 0) throw ConfigError("msb: branch kernel sizes must be odd and >= 3, got " + std::to_string(k));
  if (!(expansion > 0.0)) throw ConfigError("msb: expansion factor must be positive");
}

template <typename T>
MixedScaleBlock<T>::MixedScaleBlock(ParamStore<T>& store, const std::string& prefix, std::size_t channels,
                                    const MsbBranchSpec& spec)
    : channels_(channels) {
  spec.validate();
  const std::size_t wide = expanded_width(channels, spec.expansion);
  const std::size_t gated = wide / 2;
  const std::size_t nb = spec.kernels.size();

  norm1_ = Norm<T>(store, prefix + ".stage1.norm", channels);
  expand1_ = Conv<T>(store, prefix + ".stage1.expand", channels, wide);
  dwc1_ = depthwise(store, prefix + ".stage1.dwc", wide, 3);
  sca_ = Conv<T>(store, prefix + ".stage1.sca", gated, gated);
  project1_ = Conv<T>(store, prefix + ".stage1.project", gated, channels);

  norm2_ = Norm<T>(store, prefix + ".stage2.norm", channels);
  for (std::size_t b = 0; b < nb; ++b) {
    const std::string p = prefix + ".stage2.branch" + std::to_string(b);
    Branch br;
    br.expand = Conv<T>(store, p + ".expand", channels, wide);
    br.dwc = depthwise(store, p + ".dwc", wide, spec.kernels[b]);
    branches_.push_back(std::move(br));
  }
  for (std::size_t b = 0; b < nb; ++b) {
    const std::string p = prefix + ".stage2.branch" + std::to_string(b);
    branches_[b].mix_dwc = depthwise(store, p + ".mix_dwc", nb * gated, spec.kernels[b]);
  }
  fuse_ = Conv<T>(store, prefix + ".stage2.fuse", nb * nb * gated / 2, channels);
}

template <typename T>
Tensor<T> MixedScaleBlock<T>::operator()(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != channels_)
    throw ConfigError("msb: expected " + std::to_string(channels_) + " channels, got input " + shape_str(x.shape()));

  const auto refined = sca(simple_gate(dwc1_(expand1_(norm1_(x)))), sca_);
  const auto spatial = add(project1_(refined), x);

  const auto normed = norm2_(spatial);
  std::vector<Tensor<T>> first;
  for (const auto& br : branches_) first.push_back(simple_gate(br.dwc(br.expand(normed))));

  // Branch b sees its own features first, then the others in cyclic order.
  const std::size_t nb = branches_.size();
  std::vector<Tensor<T>> second;
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<Tensor<T>> parts;
    for (std::size_t j = 0; j < nb; ++j) parts.push_back(first[(b + j) % nb]);
    const auto mixed = nb == 1 ? parts[0] : concat_channels(std::span<const Tensor<T>>(parts));
    second.push_back(simple_gate(branches_[b].mix_dwc(mixed)));
  }
  const auto context = fuse_(nb == 1 ? second[0] : concat_channels(std::span<const Tensor<T>>(second)));
  return add(spatial, context);
}

template class MixedScaleBlock<float>;
template class MixedScaleBlock<double>;

}  // namespace mssf::nn
