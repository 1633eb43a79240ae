// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mssf/config.hpp"
#include "mssf/data/dataset.hpp"
#include "mssf/model/model.hpp"
#include "mssf/train/optim.hpp"

namespace mssf::train {

struct TrainConfig {
  std::uint64_t total_iters = 2000;
  std::size_t batch = 4;
  double base_lr = 1e-3;
  double final_lr = 1e-7;
  AdamOptions adam;
  data::PatchOptions patch;
  data::AugmentOptions augment;
  std::uint64_t checkpoint_every = 0;  // 0: only the final checkpoint
  /// Recorded with the preset (the smaller model is trained 4x longer at
  /// full scale); total_iters is used as given.
  std::uint64_t iteration_multiplier = 1;
  std::uint64_t seed = 0;

  void validate() const;
  /// `train.*` keys of a flat configuration.
  static std::vector<std::string> keys();
  void write(KeyValues& kv) const;
  static TrainConfig read(const KeyValues& kv);
  /// Full-scale recipe (100k iterations, batch 32) for preset T or S.
  static TrainConfig full_scale(const std::string& preset);
};

struct LossRecord {
  std::uint64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// "step,lr,loss" with shortest round-trip number formatting.
std::string format_loss_record(const LossRecord& r);

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  /// Called every checkpoint_every steps and after the last step.
  std::function<void(std::uint64_t step, const OptimizerState&)> on_checkpoint;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  OptimizerState optimizer;
};

/// Iteration-based training: step t uses cosine_lr(t, total_iters), draws
/// the next (augmented) batch, applies stochastic depth from the model
/// config and takes one Adam step on the L1 loss. A non-finite loss or
/// gradient aborts with a NumericError naming the first offending
/// parameter.
TrainResult train(Model<float>& model, const std::vector<data::PatchRecord>& records, const TrainConfig& config,
                  const TrainHooks& hooks = {});

}  // namespace mssf::train
