// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mssf/nn/layers.hpp"

namespace mssf::nn {

struct MsbBranchSpec {
  std::vector<std::size_t> kernels{3, 5};
  double expansion = 1.5;

  void validate() const;
};

/// Two-stage block: full-resolution refinement (LN, expand, 3x3 depth-wise,
/// gate, channel attention, project, residual), then parallel depth-wise
/// paths of different kernel sizes whose gated outputs are cross-concatenated,
/// filtered again and fused back to C channels, added to the first stage.
template <typename T>
class MixedScaleBlock {
 public:
  MixedScaleBlock(ParamStore<T>& store, const std::string& prefix, std::size_t channels, const MsbBranchSpec& spec);
  Tensor<T> operator()(const Tensor<T>& x) const;

  std::size_t channels() const { return channels_; }

 private:
  struct Branch {
    Conv<T> expand;
    Conv<T> dwc;
    Conv<T> mix_dwc;
  };
  std::size_t channels_;
  Norm<T> norm1_;
  Conv<T> expand1_, dwc1_, sca_, project1_;
  Norm<T> norm2_;
  std::vector<Branch> branches_;
  Conv<T> fuse_;
};

enum class SfamVariant { conventional, literal };
enum class AttentionScope { epipolar_row, global };

struct SfamOptions {
  std::size_t reduction = 2;
  SfamVariant variant = SfamVariant::conventional;
  AttentionScope scope = AttentionScope::epipolar_row;
  bool selection = true;
};

/// Attention matrices of one SFAM call, [rows, W, W] for the epipolar scope
/// and [N, HW, HW] for the global one.
template <typename T>
struct AttentionTrace {
  Tensor<T> into_left;
  Tensor<T> into_right;
};

/// Cross-view fusion: joint-view channel selection of both views, then
/// bidirectional scaled dot-product attention and lambda-weighted addition.
template <typename T>
class SelectiveFusionAttention {
 public:
  SelectiveFusionAttention(ParamStore<T>& store, const std::string& prefix, std::size_t channels,
                           const SfamOptions& opts);

  /// Selected queries (Q_L, Q_R). Without selection these are LN(x).
  std::pair<Tensor<T>, Tensor<T>> select(const Tensor<T>& left, const Tensor<T>& right) const;

  /// Channel descriptors (softmax over channels, [N,C,1,1]) for both views.
  std::pair<Tensor<T>, Tensor<T>> descriptors(const Tensor<T>& left, const Tensor<T>& right) const;

  std::pair<Tensor<T>, Tensor<T>> attend_fuse(const Tensor<T>& left, const Tensor<T>& right,
                                              const Tensor<T>& query_left, const Tensor<T>& query_right,
                                              AttentionTrace<T>* trace = nullptr) const;

  std::pair<Tensor<T>, Tensor<T>> operator()(const Tensor<T>& left, const Tensor<T>& right,
                                             AttentionTrace<T>* trace = nullptr) const;

  const SfamOptions& options() const { return opts_; }

 private:
  std::size_t channels_;
  SfamOptions opts_;
  Norm<T> norm_left_, norm_right_;
  Conv<T> down_, desc_left_, desc_right_;
  Conv<T> value_left_, value_right_;
  Tensor<T> lambda_left_, lambda_right_;
};

/// softmax(Q K^T / sqrt(C)) V over rows (epipolar) or whole maps (global).
/// Q, K, V are [N,C,H,W]; `weights` receives the attention matrices.
template <typename T>
Tensor<T> cross_attention(const Tensor<T>& query, const Tensor<T>& key, const Tensor<T>& value, AttentionScope scope,
                          Tensor<T>* weights = nullptr);

/// Local residual conv path and a global spectral path, fused by a 1x1 conv.
template <typename T>
class FourierConvBlock {
 public:
  FourierConvBlock(ParamStore<T>& store, const std::string& prefix, std::size_t channels, double expansion = 2.0);
  Tensor<T> operator()(const Tensor<T>& x) const;

  Tensor<T> local_branch(const Tensor<T>& x) const;
  Tensor<T> global_branch(const Tensor<T>& x) const;

 private:
  std::size_t channels_;
  Conv<T> local_expand_;
  Norm<T> local_norm_;
  Conv<T> local_project_;
  Conv<T> global_expand_;
  Norm<T> global_norm_;
  Conv<T> spectral_conv_;
  Norm<T> spectral_norm_;
  Conv<T> global_project_;
  Conv<T> fuse_;
};

/// 3x3 conv to 3*s*s channels followed by pixel shuffle.
template <typename T>
class Upsampler {
 public:
  Upsampler(ParamStore<T>& store, const std::string& prefix, std::size_t channels, std::size_t scale);
  Tensor<T> operator()(const Tensor<T>& x) const;

 private:
  std::size_t scale_;
  Conv<T> conv_;
};

extern template class MixedScaleBlock<float>;
extern template class MixedScaleBlock<double>;
extern template class SelectiveFusionAttention<float>;
extern template class SelectiveFusionAttention<double>;
extern template class FourierConvBlock<float>;
extern template class FourierConvBlock<double>;
extern template class Upsampler<float>;
extern template class Upsampler<double>;

}  // namespace mssf::nn
