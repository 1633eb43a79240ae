// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "mssf/model/checkpoint.hpp"
#include "mssf/nn/param_store.hpp"

namespace mssf::train {

/// mean|sr_left - hr_left| + mean|sr_right - hr_right|.
template <typename T>
Tensor<T> l1_loss(const Tensor<T>& sr_left, const Tensor<T>& sr_right, const Tensor<T>& hr_left,
                  const Tensor<T>& hr_right);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.9;
  double eps = 1e-8;
  double weight_decay = 0.0;

  void validate() const;
};

/// Fresh state (zero moments, step 0) shaped like `store`.
OptimizerState make_optimizer_state(const nn::ParamStore<float>& store);

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Moments are kept in float; the update itself is evaluated in
/// double and rounded once.
void adam_step(nn::ParamStore<float>& store, OptimizerState& state, double lr, const AdamOptions& options);

/// Cosine annealing from `base` at t = 0 to `final` at t = total, single
/// cycle. Both endpoints are returned exactly.
double cosine_lr(std::uint64_t t, std::uint64_t total, double base = 1e-3, double final = 1e-7);

}  // namespace mssf::train
