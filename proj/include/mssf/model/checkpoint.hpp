// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mssf/model/model.hpp"

namespace mssf {

/// Adam moments, one pair per parameter in registration order.
struct OptimizerState {
  std::uint64_t step = 0;
  std::vector<TensorF> first_moment;
  std::vector<TensorF> second_moment;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// File layout: "MSSF", u32 version, canonical `model.*` config text, u64
/// training step, u32 record count, then (name, tensor) records sorted by
/// name, then u8 optimizer flag and, when set, u64 optimizer step followed
/// by the first and second moments in record order.
void save_checkpoint(std::ostream& os, const Model<float>& model, std::uint64_t step,
                     const OptimizerState* optimizer = nullptr);
void save_checkpoint(const std::string& path, const Model<float>& model, std::uint64_t step,
                     const OptimizerState* optimizer = nullptr);

struct CheckpointInfo {
  ModelConfig config;
  std::uint64_t step = 0;
  std::optional<OptimizerState> optimizer;
};

/// Reads only the header and config record.
ModelConfig read_checkpoint_config(std::istream& is);
ModelConfig read_checkpoint_config(const std::string& path);

/// Loads parameters into `model`, whose configuration must match the file's
/// (ConfigError listing every differing field otherwise).
CheckpointInfo load_checkpoint(std::istream& is, Model<float>& model);
CheckpointInfo load_checkpoint(const std::string& path, Model<float>& model);

/// Parameter records in the order they are written.
std::vector<std::size_t> sorted_param_order(const nn::ParamStore<float>& store);

}  // namespace mssf
