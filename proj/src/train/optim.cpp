// SPDX-License-Identifier: Apache-2.0
#include "mssf/train/optim.hpp"

#include <cmath>
#include <numbers>

#include "mssf/ops.hpp"

namespace mssf::train {

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& sr_left, const Tensor<T>& sr_right, const Tensor<T>& hr_left,
                  const Tensor<T>& hr_right) {
  if (sr_left.shape() != hr_left.shape() || sr_right.shape() != hr_right.shape())
    throw InputError("l1_loss: output " + shape_str(sr_left.shape()) + "/" + shape_str(sr_right.shape()) +
                     " does not match target " + shape_str(hr_left.shape()) + "/" + shape_str(hr_right.shape()));
  return add(mean(abs(sub(sr_left, hr_left))), mean(abs(sub(sr_right, hr_right))));
}

template Tensor<float> l1_loss(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&,
                               const Tensor<float>&);
template Tensor<double> l1_loss(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&,
                                const Tensor<double>&);

void AdamOptions::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0,1), got " + format_real(beta1));
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0,1), got " + format_real(beta2));
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive, got " + format_real(eps));
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
}

OptimizerState make_optimizer_state(const nn::ParamStore<float>& store) {
  OptimizerState s;
  for (const auto& e : store.entries()) {
    s.first_moment.emplace_back(e.value.shape());
    s.second_moment.emplace_back(e.value.shape());
  }
  return s;
}

void adam_step(nn::ParamStore<float>& store, OptimizerState& state, double lr, const AdamOptions& options) {
  const auto& entries = store.entries();
  if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size())
    throw ConfigError("optimizer state holds " + std::to_string(state.first_moment.size()) +
                      " moments for " + std::to_string(entries.size()) + " parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(options.beta1, t), correct2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor<float> param = entries[i].value;
    auto p = param.mutable_data();
    auto g = param.grad();
    auto m = state.first_moment[i].mutable_data();
    auto v = state.second_moment[i].mutable_data();
    if (m.size() != p.size() || v.size() != p.size())
      throw ConfigError("optimizer state shape mismatch at " + entries[i].name);
    for (std::size_t k = 0; k < p.size(); ++k) {
      double grad = g[k];
      if (options.weight_decay != 0.0) grad += options.weight_decay * p[k];
      const double mk = options.beta1 * m[k] + (1.0 - options.beta1) * grad;
      const double vk = options.beta2 * v[k] + (1.0 - options.beta2) * grad * grad;
      m[k] = static_cast<float>(mk);
      v[k] = static_cast<float>(vk);
      const double update = lr * (mk / correct1) / (std::sqrt(vk / correct2) + options.eps);
      p[k] = static_cast<float>(p[k] - update);
    }
  }
}

double cosine_lr(std::uint64_t t, std::uint64_t total, double base, double final) {
  if (total == 0) throw UsageError("cosine_lr: total iterations must be at least 1");
  if (t > total)
    throw UsageError("cosine_lr: step " + std::to_string(t) + " is outside [0, " + std::to_string(total) + "]");
  if (t == 0) return base;
  if (t == total) return final;
  const double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(total);
  return final + 0.5 * (base - final) * (1.0 + std::cos(phase));
}

}  // namespace mssf::train
