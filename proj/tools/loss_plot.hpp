// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "mssf/train/trainer.hpp"

namespace mssf::tools {

/// Renders the loss trace (log-scale y) to an RGB PNG: raw values in a light
/// tone, a 100-step moving average on top.
void plot_loss(const std::string& path, const std::vector<train::LossRecord>& trace);

}  // namespace mssf::tools
