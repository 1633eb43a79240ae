// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mssf/gradcheck.hpp"
#include "mssf/model/model.hpp"

namespace mssf {

struct BlockGradReport {
  std::string block;
  GradCheckResult result;
};

struct GradSuiteOptions {
  double tolerance = 1e-4;
  /// Central-difference step.
  double step = 1e-5;
  /// Probes per parameter tensor for the whole-model check (0: all).
  std::size_t model_probes_per_leaf = 12;
  std::uint64_t seed = 0;
};

/// 64-bit finite-difference checks of one MSB, one SFAM, each enabled FFCB
/// and the upsampler, built with the options of `config` and run on
/// [1,C,4,6] features, followed by the whole model on a [1,3,4,6] stereo pair. Parameters are randomized away
/// from their initial values so every path (lambda included) is exercised.
std::vector<BlockGradReport> gradient_suite(const ModelConfig& config, const GradSuiteOptions& options = {});

struct CheckOutcome {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the built-in invariant checks (transforms, blocks, model, metrics,
/// schedule, serialization, data) and the gradient suite for `config`.
std::vector<CheckOutcome> self_test(const ModelConfig& config, std::uint64_t seed = 0);

}  // namespace mssf
