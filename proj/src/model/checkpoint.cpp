// SPDX-License-Identifier: Apache-2.0
#include "mssf/model/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "mssf/serialize.hpp"

namespace mssf {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'S', 'F'};

std::string config_text(const ModelConfig& c) {
  KeyValues kv;
  c.write(kv);
  return kv.to_text();
}

void read_header(std::istream& is) {
  char magic[4];
  io::read_bytes(is, magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("not a checkpoint (bad magic bytes)");
  const auto version = io::read_u32(is);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
}

ModelConfig parse_config(const std::string& text) {
  try {
    return ModelConfig::read(KeyValues::parse(text, "checkpoint config"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config record is invalid: ") + e.what());
  }
}

}  // namespace

std::vector<std::size_t> sorted_param_order(const nn::ParamStore<float>& store) {
  std::vector<std::size_t> order(store.entries().size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return store.entries()[a].name < store.entries()[b].name; });
  return order;
}

void save_checkpoint(std::ostream& os, const Model<float>& model, std::uint64_t step,
                     const OptimizerState* optimizer) {
  const auto& store = model.params();
  io::write_bytes(os, kMagic, 4);
  io::write_u32(os, kCheckpointVersion);
  io::write_string(os, config_text(model.config()));
  io::write_u64(os, step);
  const auto order = sorted_param_order(store);
  io::write_u32(os, static_cast<std::uint32_t>(order.size()));
  for (auto i : order) {
    io::write_string(os, store.entries()[i].name);
    write_tensor(os, store.entries()[i].value);
  }
  io::write_u8(os, optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->first_moment.size() != order.size() || optimizer->second_moment.size() != order.size())
      throw UsageError("optimizer state does not match the model's parameter count");
    io::write_u64(os, optimizer->step);
    for (auto i : order) write_tensor(os, optimizer->first_moment[i]);
    for (auto i : order) write_tensor(os, optimizer->second_moment[i]);
  }
  if (!os) throw InputError("failed to write checkpoint");
}

void save_checkpoint(const std::string& path, const Model<float>& model, std::uint64_t step,
                     const OptimizerState* optimizer) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InputError("cannot write checkpoint " + path);
  save_checkpoint(os, model, step, optimizer);
}

ModelConfig read_checkpoint_config(std::istream& is) {
  read_header(is);
  return parse_config(io::read_string(is));
}

ModelConfig read_checkpoint_config(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read checkpoint " + path);
  return read_checkpoint_config(is);
}

CheckpointInfo load_checkpoint(std::istream& is, Model<float>& model) {
  CheckpointInfo info;
  info.config = read_checkpoint_config(is);
  const auto diffs = config_differences(model.config(), info.config);
  if (!diffs.empty()) {
    std::string msg = "checkpoint configuration does not match the model:";
    for (const auto& d : diffs) msg += " " + d + ";";
    msg.pop_back();
    throw ConfigError(msg);
  }
  info.step = io::read_u64(is);
  auto& store = model.params();
  const auto count = io::read_u32(is);
  if (count != store.entries().size())
    throw FormatError("checkpoint has " + std::to_string(count) + " parameters, model has " +
                      std::to_string(store.entries().size()));
  const auto order = sorted_param_order(store);
  for (auto i : order) {
    const auto name = io::read_string(is);
    const auto& entry = store.entries()[i];
    if (name != entry.name) {
      if (!store.contains(name)) throw FormatError("checkpoint has unknown parameter " + name);
      throw FormatError("checkpoint parameter order is corrupt near " + name);
    }
    auto t = read_tensor<float>(is);
    if (t.shape() != entry.value.shape())
      throw FormatError("parameter " + name + " has shape " + shape_str(t.shape()) + " in the checkpoint, expected " +
                        shape_str(entry.value.shape()));
    auto dst = entry.value;
    std::copy(t.data().begin(), t.data().end(), dst.mutable_data().begin());
  }
  if (io::read_u8(is)) {
    OptimizerState opt;
    opt.step = io::read_u64(is);
    for (auto* moments : {&opt.first_moment, &opt.second_moment}) {
      moments->resize(order.size());
      for (auto i : order) {
        auto t = read_tensor<float>(is);
        if (t.shape() != store.entries()[i].value.shape())
          throw FormatError("optimizer moment for " + store.entries()[i].name + " has the wrong shape");
        (*moments)[i] = std::move(t);
      }
    }
    info.optimizer = std::move(opt);
  }
  return info;
}

CheckpointInfo load_checkpoint(const std::string& path, Model<float>& model) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot read checkpoint " + path);
  return load_checkpoint(is, model);
}

}  // namespace mssf
