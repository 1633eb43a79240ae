// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mssf/tensor.hpp"

namespace mssf {

struct GradCheckOptions {
  double step = 1e-5;
  /// Upper bound on probed elements per leaf; 0 probes every element.
  /// When sampling, indices are drawn deterministically from `seed`.
  std::size_t max_probes_per_leaf = 0;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  /// max |autodiff - central difference| / (|central difference| + 1e-8)
  double max_rel_error = 0.0;
  std::string worst_leaf;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t probes = 0;
};

/// Compares reverse-mode gradients of `loss_fn` against central finite
/// differences. `loss_fn` must read the current values of `leaves` and return
/// a scalar; it is re-evaluated twice per probed element.
GradCheckResult gradient_check(std::vector<TensorD> leaves, std::vector<std::string> names,
                               const std::function<TensorD()>& loss_fn, GradCheckOptions opts = {});

/// sum(y * w): a scalar probe whose gradient w.r.t. y is w.
TensorD weighted_sum(const TensorD& y, const TensorD& w);

}  // namespace mssf
