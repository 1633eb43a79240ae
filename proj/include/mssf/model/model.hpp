// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mssf/config.hpp"
#include "mssf/nn/blocks.hpp"

namespace mssf {

struct ModelConfig {
  std::size_t channels = 48;
  std::size_t blocks = 16;
  std::size_t scale = 2;
  double stochastic_depth_prob = 0.0;
  nn::MsbBranchSpec msb;
  std::size_t sfam_reduction = 2;
  nn::SfamVariant sfam_variant = nn::SfamVariant::conventional;
  nn::AttentionScope attention_scope = nn::AttentionScope::epipolar_row;
  bool selection = true;
  bool ffcb_early = true;
  bool ffcb_final = true;
  double ffcb_expansion = 2.0;

  void validate() const;

  /// Named architecture presets: "T" (C=48, N=16), "S" (C=64, N=32, p=0.1)
  /// and "desk" (C=16, N=2).
  static ModelConfig preset(const std::string& name, std::size_t scale = 2);

  /// `model.*` keys of a flat configuration.
  static std::vector<std::string> keys();
  void write(KeyValues& kv) const;
  static ModelConfig read(const KeyValues& kv);

  bool operator==(const ModelConfig&) const;
};

/// Names of `model.*` fields whose values differ, with both values.
std::vector<std::string> config_differences(const ModelConfig& expected, const ModelConfig& found);

template <typename T>
struct StereoOutput {
  Tensor<T> left;
  Tensor<T> right;
};

/// Full stereo network. One parameter set serves both views: shallow 3x3
/// conv, optional early FFCB, N x (MSB then SFAM), optional final FFCB,
/// pixel-shuffle head, plus the bilinearly upsampled input.
template <typename T>
class Model {
 public:
  explicit Model(const ModelConfig& config);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParamStore<T>& params() { return store_; }
  const nn::ParamStore<T>& params() const { return store_; }
  std::size_t count_params() const { return store_.count(); }

  void initialize(std::uint64_t seed) { store_.initialize(seed); }

  /// Inputs are [N,3,H,W] in [0,1]. In training mode each MSB+SFAM pair is
  /// skipped with the configured probability (drawn from `rng`) and kept
  /// pairs are rescaled by the survival probability.
  StereoOutput<T> forward(const Tensor<T>& lr_left, const Tensor<T>& lr_right, bool training = false,
                          std::mt19937_64* rng = nullptr) const;

  /// Network residual only (no bilinear term), same stochastic-depth rules.
  StereoOutput<T> residual(const Tensor<T>& lr_left, const Tensor<T>& lr_right, bool training = false,
                           std::mt19937_64* rng = nullptr) const;

  /// Element count of the N MSB+SFAM stages.
  std::size_t trunk_block_params() const;

 private:
  struct Stage {
    nn::MixedScaleBlock<T> msb;
    nn::SelectiveFusionAttention<T> sfam;
  };
  ModelConfig config_;
  nn::ParamStore<T> store_;
  nn::Conv<T> shallow_;
  std::unique_ptr<nn::FourierConvBlock<T>> ffcb_early_, ffcb_final_;
  std::vector<Stage> stages_;
  std::unique_ptr<nn::Upsampler<T>> head_;
};

extern template class Model<float>;
extern template class Model<double>;

}  // namespace mssf
