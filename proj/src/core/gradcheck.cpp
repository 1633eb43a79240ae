// SPDX-License-Identifier: Apache-2.0
#include "mssf/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mssf/ops.hpp"

namespace mssf {

TensorD weighted_sum(const TensorD& y, const TensorD& w) { return sum(mul(y, w)); }

GradCheckResult gradient_check(std::vector<TensorD> leaves, std::vector<std::string> names,
                               const std::function<TensorD()>& loss_fn, GradCheckOptions opts) {
  if (names.size() != leaves.size()) names.resize(leaves.size());
  for (auto& leaf : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    auto loss = loss_fn();
    loss.backward();
  }
  std::vector<std::vector<double>> analytic;
  for (auto& leaf : leaves) analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  GradCheckResult result;
  std::mt19937_64 rng(opts.seed);
  NoGradGuard no_grad;
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    std::vector<std::size_t> idx(leaf.numel());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_probes_per_leaf && idx.size() > opts.max_probes_per_leaf) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(opts.max_probes_per_leaf);
      std::sort(idx.begin(), idx.end());
    }
    for (auto i : idx) {
      auto data = leaf.mutable_data();
      const double saved = data[i];
      data[i] = saved + opts.step;
      const double fp = loss_fn().item();
      data[i] = saved - opts.step;
      const double fm = loss_fn().item();
      data[i] = saved;
      const double fd = (fp - fm) / (2.0 * opts.step);
      const double rel = std::abs(analytic[li][i] - fd) / (std::abs(fd) + 1e-8);
      ++result.probes;
      if (result.probes == 1 || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_leaf = names[li];
        result.worst_index = i;
        result.worst_analytic = analytic[li][i];
        result.worst_numeric = fd;
      }
    }
  }
  return result;
}

}  // namespace mssf
