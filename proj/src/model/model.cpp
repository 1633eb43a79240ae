// SPDX-License-Identifier: Apache-2.0
#include "mssf/model/model.hpp"

#include <algorithm>
#include <cstdio>

#include "mssf/log.hpp"
#include "mssf/ops.hpp"

namespace mssf {

namespace {

std::string two_digits(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02zu", i);
  return buf;
}

const char* variant_name(nn::SfamVariant v) { return v == nn::SfamVariant::literal ? "literal" : "conventional"; }
const char* scope_name(nn::AttentionScope s) { return s == nn::AttentionScope::global ? "global" : "epipolar_row"; }

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (auto k : v) out += (out.empty() ? "" : ",") + std::to_string(k);
  return out;
}

}  // namespace

void ModelConfig::validate() const {
  if (channels == 0) throw ConfigError("model.channels must be positive");
  if (blocks == 0) throw ConfigError("model.blocks must be positive");
  if (scale != 2 && scale != 4) throw ConfigError("model.scale must be 2 or 4, got " + std::to_string(scale));
  if (!(stochastic_depth_prob >= 0.0 && stochastic_depth_prob <= 1.0))
    throw ConfigError("model.stochastic_depth_prob must lie in [0, 1]");
  if (sfam_reduction == 0) throw ConfigError("model.sfam_reduction must be positive");
  if (!(ffcb_expansion > 0.0)) throw ConfigError("model.ffcb_expansion must be positive");
  msb.validate();
}

ModelConfig ModelConfig::preset(const std::string& name, std::size_t scale) {
  ModelConfig c;
  c.scale = scale;
  if (name == "T") {
    c.channels = 48;
    c.blocks = 16;
  } else if (name == "S") {
    c.channels = 64;
    c.blocks = 32;
    c.stochastic_depth_prob = 0.1;
  } else if (name == "desk") {
    c.channels = 16;
    c.blocks = 2;
  } else {
    throw ConfigError("unknown preset '" + name + "' (expected T, S or desk)");
  }
  c.validate();
  return c;
}

std::vector<std::string> ModelConfig::keys() {
  return {"model.channels",       "model.blocks",         "model.scale",          "model.stochastic_depth_prob",
          "model.msb_kernels",    "model.msb_expansion",  "model.sfam_reduction", "model.sfam_variant",
          "model.attention_scope", "model.selection",     "model.ffcb_early",     "model.ffcb_final",
          "model.ffcb_expansion"};
}

void ModelConfig::write(KeyValues& kv) const {
  kv.set("model.channels", std::to_string(channels));
  kv.set("model.blocks", std::to_string(blocks));
  kv.set("model.scale", std::to_string(scale));
  kv.set("model.stochastic_depth_prob", format_real(stochastic_depth_prob));
  kv.set("model.msb_kernels", join(msb.kernels));
  kv.set("model.msb_expansion", format_real(msb.expansion));
  kv.set("model.sfam_reduction", std::to_string(sfam_reduction));
  kv.set("model.sfam_variant", variant_name(sfam_variant));
  kv.set("model.attention_scope", scope_name(attention_scope));
  kv.set("model.selection", selection ? "true" : "false");
  kv.set("model.ffcb_early", ffcb_early ? "true" : "false");
  kv.set("model.ffcb_final", ffcb_final ? "true" : "false");
  kv.set("model.ffcb_expansion", format_real(ffcb_expansion));
}

ModelConfig ModelConfig::read(const KeyValues& kv) {
  ModelConfig c;
  for (const auto& [key, value] : kv.entries()) {
    if (!key.starts_with("model.")) continue;
    if (key == "model.channels") c.channels = kv.get_size(key);
    else if (key == "model.blocks") c.blocks = kv.get_size(key);
    else if (key == "model.scale") c.scale = kv.get_size(key);
    else if (key == "model.stochastic_depth_prob") c.stochastic_depth_prob = kv.get_real(key);
    else if (key == "model.msb_kernels") c.msb.kernels = kv.get_size_list(key);
    else if (key == "model.msb_expansion") c.msb.expansion = kv.get_real(key);
    else if (key == "model.sfam_reduction") c.sfam_reduction = kv.get_size(key);
    else if (key == "model.sfam_variant") {
      if (value == "conventional") c.sfam_variant = nn::SfamVariant::conventional;
      else if (value == "literal") c.sfam_variant = nn::SfamVariant::literal;
      else throw ConfigError("model.sfam_variant must be conventional or literal, got '" + value + "'");
    } else if (key == "model.attention_scope") {
      if (value == "epipolar_row") c.attention_scope = nn::AttentionScope::epipolar_row;
      else if (value == "global") c.attention_scope = nn::AttentionScope::global;
      else throw ConfigError("model.attention_scope must be epipolar_row or global, got '" + value + "'");
    } else if (key == "model.selection") c.selection = kv.get_bool(key);
    else if (key == "model.ffcb_early") c.ffcb_early = kv.get_bool(key);
    else if (key == "model.ffcb_final") c.ffcb_final = kv.get_bool(key);
    else if (key == "model.ffcb_expansion") c.ffcb_expansion = kv.get_real(key);
    else throw ConfigError("unknown config key " + key);
  }
  c.validate();
  return c;
}

bool ModelConfig::operator==(const ModelConfig& o) const { return config_differences(*this, o).empty(); }

std::vector<std::string> config_differences(const ModelConfig& expected, const ModelConfig& found) {
  KeyValues a, b;
  expected.write(a);
  found.write(b);
  std::vector<std::string> out;
  for (const auto& [k, v] : a.entries()) {
    const auto& w = b.get(k);
    if (v != w) out.push_back(k.substr(6) + " (expected " + v + ", found " + w + ")");
  }
  return out;
}

template <typename T>
Model<T>::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t c = config_.channels;
  shallow_ = nn::Conv<T>(store_, "shallow", 3, c, 3);
  if (config_.ffcb_early)
    ffcb_early_ = std::make_unique<nn::FourierConvBlock<T>>(store_, "ffcb_early", c, config_.ffcb_expansion);
  nn::SfamOptions sfam_opts;
  sfam_opts.reduction = config_.sfam_reduction;
  sfam_opts.variant = config_.sfam_variant;
  sfam_opts.scope = config_.attention_scope;
  sfam_opts.selection = config_.selection;
  stages_.reserve(config_.blocks);
  for (std::size_t i = 0; i < config_.blocks; ++i) {
    const auto id = two_digits(i);
    nn::MixedScaleBlock<T> msb(store_, "trunk.msb." + id, c, config_.msb);
    nn::SelectiveFusionAttention<T> sfam(store_, "trunk.sfam." + id, c, sfam_opts);
    stages_.push_back({std::move(msb), std::move(sfam)});
  }
  if (config_.ffcb_final)
    ffcb_final_ = std::make_unique<nn::FourierConvBlock<T>>(store_, "ffcb_final", c, config_.ffcb_expansion);
  head_ = std::make_unique<nn::Upsampler<T>>(store_, "head", c, config_.scale);
}

template <typename T>
std::size_t Model<T>::trunk_block_params() const {
  std::size_t n = 0;
  for (const auto& e : store_.entries())
    if (e.name.starts_with("trunk.")) n += e.value.numel();
  return n;
}

template <typename T>
StereoOutput<T> Model<T>::residual(const Tensor<T>& lr_left, const Tensor<T>& lr_right, bool training,
                                   std::mt19937_64* rng) const {
  if (lr_left.rank() != 4 || lr_left.dim(1) != 3)
    throw InputError("model input must be [N,3,H,W], got " + shape_str(lr_left.shape()));
  if (lr_left.shape() != lr_right.shape())
    throw InputError("left and right views differ in shape: " + shape_str(lr_left.shape()) + " vs " +
                     shape_str(lr_right.shape()));
  const double p = config_.stochastic_depth_prob;
  const bool drop_path = training && p > 0.0;
  if (drop_path && !rng) throw UsageError("training forward with stochastic depth needs an rng");

  auto left = shallow_(lr_left);
  auto right = shallow_(lr_right);
  if (ffcb_early_) {
    left = (*ffcb_early_)(left);
    right = (*ffcb_early_)(right);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& stage : stages_) {
    bool keep = true;
    if (drop_path) keep = unit(*rng) >= p;
    if (!keep) continue;
    auto [fl, fr] = stage.sfam(stage.msb(left), stage.msb(right));
    if (drop_path) {
      const T inv_survival = static_cast<T>(1.0 / (1.0 - p));
      fl = add(left, scale(sub(fl, left), inv_survival));
      fr = add(right, scale(sub(fr, right), inv_survival));
    }
    left = fl;
    right = fr;
  }
  if (ffcb_final_) {
    left = (*ffcb_final_)(left);
    right = (*ffcb_final_)(right);
  }
  return {(*head_)(left), (*head_)(right)};
}

template <typename T>
StereoOutput<T> Model<T>::forward(const Tensor<T>& lr_left, const Tensor<T>& lr_right, bool training,
                                  std::mt19937_64* rng) const {
  auto in_range = [](const Tensor<T>& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](T v) { return v >= T(0) && v <= T(1); });
  };
  if (!in_range(lr_left) || !in_range(lr_right))
    log::warn("model input has values outside [0, 1]; outputs are clamped only when written");
  auto r = residual(lr_left, lr_right, training, rng);
  const std::size_t s = config_.scale;
  return {add(r.left, bilinear_upsample(lr_left, s)), add(r.right, bilinear_upsample(lr_right, s))};
}

template class Model<float>;
template class Model<double>;

}  // namespace mssf
