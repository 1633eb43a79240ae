// SPDX-License-Identifier: Apache-2.0
#include "mssf/train/trainer.hpp"

#include <cmath>

#include "mssf/log.hpp"

namespace mssf::train {

namespace {

// First parameter whose values (or, failing that, gradients) are not finite.
std::string first_non_finite(const nn::ParamStore<float>& store) {
  for (const auto& e : store.entries())
    for (float v : e.value.data())
      if (!std::isfinite(v)) return "parameter " + e.name;
  for (const auto& e : store.entries()) {
    Tensor<float> t = e.value;
    for (float v : t.grad())
      if (!std::isfinite(v)) return "gradient of " + e.name;
  }
  return {};
}

[[noreturn]] void abort_non_finite(const nn::ParamStore<float>& store, std::uint64_t step, const std::string& detail) {
  const std::string culprit = first_non_finite(store);
  throw NumericError("training diverged at step " + std::to_string(step) + ": " +
                     (culprit.empty() ? "non-finite activation" : "non-finite " + culprit) + " (" + detail + ")");
}

}  // namespace

void TrainConfig::validate() const {
  if (total_iters == 0) throw ConfigError("train.total_iters must be at least 1");
  if (batch == 0) throw ConfigError("train.batch must be at least 1");
  if (!(final_lr > 0.0 && final_lr <= base_lr))
    throw ConfigError("train.final_lr must satisfy 0 < final_lr <= base_lr (got " + format_real(final_lr) + ", " +
                      format_real(base_lr) + ")");
  if (patch.height == 0 || patch.width == 0 || patch.stride == 0)
    throw ConfigError("train.patch_h, train.patch_w and train.patch_stride must be positive");
  if (iteration_multiplier == 0) throw ConfigError("train.iteration_multiplier must be at least 1");
  adam.validate();
}

std::vector<std::string> TrainConfig::keys() {
  return {"train.total_iters",  "train.batch",       "train.base_lr",           "train.final_lr",
          "train.beta1",        "train.beta2",       "train.eps",               "train.weight_decay",
          "train.patch_h",      "train.patch_w",     "train.patch_stride",      "train.aug_hflip",
          "train.aug_vflip",    "train.aug_channel_shuffle", "train.checkpoint_every", "train.iteration_multiplier",
          "train.seed"};
}

void TrainConfig::write(KeyValues& kv) const {
  auto b = [](bool v) { return std::string(v ? "true" : "false"); };
  kv.set("train.total_iters", std::to_string(total_iters));
  kv.set("train.batch", std::to_string(batch));
  kv.set("train.base_lr", format_real(base_lr));
  kv.set("train.final_lr", format_real(final_lr));
  kv.set("train.beta1", format_real(adam.beta1));
  kv.set("train.beta2", format_real(adam.beta2));
  kv.set("train.eps", format_real(adam.eps));
  kv.set("train.weight_decay", format_real(adam.weight_decay));
  kv.set("train.patch_h", std::to_string(patch.height));
  kv.set("train.patch_w", std::to_string(patch.width));
  kv.set("train.patch_stride", std::to_string(patch.stride));
  kv.set("train.aug_hflip", b(augment.hflip));
  kv.set("train.aug_vflip", b(augment.vflip));
  kv.set("train.aug_channel_shuffle", b(augment.channel_shuffle));
  kv.set("train.checkpoint_every", std::to_string(checkpoint_every));
  kv.set("train.iteration_multiplier", std::to_string(iteration_multiplier));
  kv.set("train.seed", std::to_string(seed));
}

TrainConfig TrainConfig::read(const KeyValues& kv) {
  TrainConfig c;
  for (const auto& [key, value] : kv.entries()) {
    if (!key.starts_with("train.")) continue;
    if (key == "train.total_iters") c.total_iters = kv.get_size(key);
    else if (key == "train.batch") c.batch = kv.get_size(key);
    else if (key == "train.base_lr") c.base_lr = kv.get_real(key);
    else if (key == "train.final_lr") c.final_lr = kv.get_real(key);
    else if (key == "train.beta1") c.adam.beta1 = kv.get_real(key);
    else if (key == "train.beta2") c.adam.beta2 = kv.get_real(key);
    else if (key == "train.eps") c.adam.eps = kv.get_real(key);
    else if (key == "train.weight_decay") c.adam.weight_decay = kv.get_real(key);
    else if (key == "train.patch_h") c.patch.height = kv.get_size(key);
    else if (key == "train.patch_w") c.patch.width = kv.get_size(key);
    else if (key == "train.patch_stride") c.patch.stride = kv.get_size(key);
    else if (key == "train.aug_hflip") c.augment.hflip = kv.get_bool(key);
    else if (key == "train.aug_vflip") c.augment.vflip = kv.get_bool(key);
    else if (key == "train.aug_channel_shuffle") c.augment.channel_shuffle = kv.get_bool(key);
    else if (key == "train.checkpoint_every") c.checkpoint_every = kv.get_size(key);
    else if (key == "train.iteration_multiplier") c.iteration_multiplier = kv.get_size(key);
    else if (key == "train.seed") c.seed = kv.get_size(key);
    else throw ConfigError("unknown config key " + key);
  }
  c.validate();
  return c;
}

TrainConfig TrainConfig::full_scale(const std::string& preset) {
  TrainConfig c;
  c.total_iters = 100000;
  c.batch = 32;
  if (preset == "T") c.iteration_multiplier = 4;
  else if (preset != "S") throw ConfigError("no full-scale recipe for preset '" + preset + "' (expected T or S)");
  return c;
}

std::string format_loss_record(const LossRecord& r) {
  return std::to_string(r.step) + "," + format_real(r.lr) + "," + format_real(r.loss);
}

TrainResult train(Model<float>& model, const std::vector<data::PatchRecord>& records, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  if (records.empty()) throw ConfigError("training set is empty: no patches could be extracted");
  auto& store = model.params();
  store.set_requires_grad(true);
  const auto& aug = config.augment;
  std::optional<data::AugmentOptions> augment;
  if (aug.hflip || aug.vflip || aug.channel_shuffle) augment = aug;
  data::BatchStream stream(records, config.batch, config.seed, true, augment);
  std::mt19937_64 depth_rng(config.seed ^ 0xd1b54a32d192ed03ull);

  TrainResult result;
  result.optimizer = make_optimizer_state(store);
  result.trace.reserve(config.total_iters);
  for (std::uint64_t t = 0; t < config.total_iters; ++t) {
    const double lr = cosine_lr(t, config.total_iters, config.base_lr, config.final_lr);
    const data::Batch batch = stream.next();
    store.zero_grad();
    double loss_value = 0.0;
    try {
      const auto out = model.forward(batch.lr_left, batch.lr_right, true, &depth_rng);
      const TensorF loss = l1_loss(out.left, out.right, batch.hr_left, batch.hr_right);
      loss_value = loss.item();
      loss.backward();
    } catch (const NumericError& e) {
      abort_non_finite(store, t, e.what());
    }
    if (!first_non_finite(store).empty()) abort_non_finite(store, t, "after backward");
    adam_step(store, result.optimizer, lr, config.adam);
    if (!first_non_finite(store).empty()) abort_non_finite(store, t, "after the optimizer step");

    const LossRecord rec{t, lr, loss_value};
    result.trace.push_back(rec);
    if (hooks.on_step) hooks.on_step(rec);
    const std::uint64_t done = t + 1;
    if (hooks.on_checkpoint && config.checkpoint_every != 0 && done % config.checkpoint_every == 0 &&
        done != config.total_iters)
      hooks.on_checkpoint(done, result.optimizer);
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(config.total_iters, result.optimizer);
  log::info("trained " + std::to_string(config.total_iters) + " steps, final loss " +
            format_real(result.trace.back().loss));
  return result;
}

}  // namespace mssf::train
