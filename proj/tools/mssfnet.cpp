// SPDX-License-Identifier: Apache-2.0
// mssfnet: train, evaluate and run the stereo super-resolution network.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "loss_plot.hpp"
#include "mssf/config.hpp"
#include "mssf/data/dataset.hpp"
#include "mssf/data/image.hpp"
#include "mssf/diagnostics.hpp"
#include "mssf/log.hpp"
#include "mssf/model/checkpoint.hpp"
#include "mssf/parallel.hpp"
#include "mssf/train/evaluate.hpp"
#include "mssf/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace mssf;

namespace {

constexpr int kExitOk = 0, kExitCheckFailed = 1, kExitBadInput = 2;

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "mssf_out";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::vector<std::string> overrides;
  std::string preset;
  std::string checkpoint;
};

const std::vector<std::string> kRunKeys{"data.hr_dir", "data.lr_dir", "data.manifest", "run.checkpoint",
                                        "run.threads"};

std::vector<std::string> known_keys() {
  auto keys = ModelConfig::keys();
  const auto t = train::TrainConfig::keys();
  keys.insert(keys.end(), t.begin(), t.end());
  keys.insert(keys.end(), kRunKeys.begin(), kRunKeys.end());
  return keys;
}

struct Resolved {
  KeyValues kv;
  bool model_given = false;  // preset flag or any model.* key supplied

  ModelConfig model() const { return ModelConfig::read(kv); }
  train::TrainConfig training() const { return train::TrainConfig::read(kv); }
  std::optional<std::string> get(const std::string& key) const {
    if (!kv.has(key) || kv.get(key).empty()) return std::nullopt;
    return kv.get(key);
  }
};

// Defaults, then preset, then config file, then --override, then flags.
Resolved resolve(const CommonArgs& args, const std::string& default_preset) {
  Resolved r;
  const std::string preset = args.preset.empty() ? default_preset : args.preset;
  r.model_given = !args.preset.empty();
  ModelConfig::preset(preset).write(r.kv);
  train::TrainConfig{}.write(r.kv);
  r.kv.set("run.threads", std::to_string(args.threads));
  const auto known = known_keys();
  auto apply = [&](const std::string& key, const std::string& value) {
    const std::string full = resolve_key(key, known);
    if (full.starts_with("model.")) r.model_given = true;
    r.kv.set(full, value);
  };
  if (!args.config_path.empty()) {
    if (!fs::exists(args.config_path)) throw InputError("config file does not exist: " + args.config_path);
    const KeyValues file = KeyValues::load(args.config_path);
    for (const auto& [k, v] : file.entries()) apply(k, v);
  }
  for (const auto& o : args.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--override expects key=value, got '" + o + "'");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
  if (args.seed) r.kv.set("train.seed", std::to_string(*args.seed));
  if (!args.checkpoint.empty()) r.kv.set("run.checkpoint", args.checkpoint);
  set_num_threads(static_cast<int>(r.kv.get_size("run.threads")));
  r.model();  // validates
  r.training();
  return r;
}

void write_snapshot(const CommonArgs& args, const KeyValues& kv) {
  fs::create_directories(args.out_dir);
  std::ofstream os(fs::path(args.out_dir) / "resolved_config.txt", std::ios::trunc);
  if (!os) throw InputError("cannot write to output directory " + args.out_dir);
  os << kv.to_text();
}

std::vector<data::StereoPair> load_pairs(const Resolved& r, std::size_t scale) {
  if (auto manifest = r.get("data.manifest")) return data::load_manifest(*manifest, scale);
  const auto hr = r.get("data.hr_dir");
  if (!hr) throw ConfigError("no dataset configured: set data.hr_dir or data.manifest");
  return data::load_stereo_dir(*hr, r.get("data.lr_dir"), scale);
}

// Model for eval/infer: the checkpoint's own config unless one was given.
std::unique_ptr<Model<float>> load_trained(Resolved& r) {
  const auto path = r.get("run.checkpoint");
  if (!path) throw ConfigError("no checkpoint given: pass --checkpoint or set run.checkpoint");
  if (!fs::exists(*path)) throw InputError("checkpoint does not exist: " + *path);
  const ModelConfig cfg = r.model_given ? r.model() : read_checkpoint_config(*path);
  auto model = std::make_unique<Model<float>>(cfg);
  load_checkpoint(*path, *model);
  cfg.write(r.kv);
  return model;
}

int cmd_train(const CommonArgs& args) {
  Resolved r = resolve(args, "desk");
  const ModelConfig mcfg = r.model();
  const train::TrainConfig tcfg = r.training();
  write_snapshot(args, r.kv);

  const auto pairs = load_pairs(r, mcfg.scale);
  std::vector<data::PatchRecord> records;
  for (const auto& p : pairs) {
    auto recs = data::extract_patches(p, tcfg.patch);
    records.insert(records.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  log::info("training on " + std::to_string(records.size()) + " patches from " + std::to_string(pairs.size()) +
            " image pairs");

  Model<float> model(mcfg);
  model.initialize(tcfg.seed);
  const fs::path out(args.out_dir);
  std::ofstream trace(out / "loss_trace.csv", std::ios::trunc);
  train::TrainHooks hooks;
  hooks.on_step = [&](const train::LossRecord& rec) {
    trace << train::format_loss_record(rec) << '\n';
    trace.flush();
  };
  hooks.on_checkpoint = [&](std::uint64_t step, const OptimizerState& state) {
    const auto name = step == tcfg.total_iters ? std::string("checkpoint.mssf")
                                               : "checkpoint_step" + std::to_string(step) + ".mssf";
    save_checkpoint((out / name).string(), model, step, &state);
  };
  const auto result = train::train(model, records, tcfg, hooks);
  tools::plot_loss((out / "loss.png").string(), result.trace);
  std::cout << "final loss " << format_real(result.trace.back().loss) << "\ncheckpoint "
            << (out / "checkpoint.mssf").string() << '\n';
  return kExitOk;
}

int cmd_eval(const CommonArgs& args) {
  Resolved r = resolve(args, "desk");
  auto model = load_trained(r);
  write_snapshot(args, r.kv);
  const auto report = train::evaluate(*model, load_pairs(r, model->config().scale));
  const fs::path out(args.out_dir);
  std::ofstream csv(out / "eval_report.csv", std::ios::trunc);
  train::write_report_csv(csv, report);
  std::ofstream summary(out / "eval_summary.txt", std::ios::trunc);
  train::write_report_summary(summary, report);
  train::write_report_summary(std::cout, report);
  return kExitOk;
}

int cmd_infer(const CommonArgs& args) {
  Resolved r = resolve(args, "desk");
  auto model = load_trained(r);
  write_snapshot(args, r.kv);
  const auto dir = r.get("data.lr_dir");
  if (!dir) throw ConfigError("infer reads low-resolution pairs from data.lr_dir, which is not set");
  const fs::path out(args.out_dir);
  for (const auto& lr : data::load_stereo_images(*dir)) {
    const auto sr = train::super_resolve(*model, lr);
    data::save_image((out / (lr.id + "_L_SR.png")).string(), sr.left);
    data::save_image((out / (lr.id + "_R_SR.png")).string(), sr.right);
    std::cout << lr.id << ": " << sr.height() << "x" << sr.width() << '\n';
  }
  return kExitOk;
}

int cmd_param_count(const CommonArgs& args) {
  Resolved r = resolve(args, "T");
  write_snapshot(args, r.kv);
  const ModelConfig cfg = r.model();
  const Model<float> model(cfg);
  const std::size_t count = model.count_params();
  std::cout << "parameters " << count << '\n';
  struct Published {
    const char* preset;
    std::size_t scale;
    double count;
  };
  for (const Published& p : {Published{"T", 2, 570000}, {"T", 4, 590000}, {"S", 2, 1800000}, {"S", 4, 1820000}}) {
    if (ModelConfig::preset(p.preset, p.scale) == cfg) {
      std::cout << "published " << std::fixed << std::setprecision(2) << p.count / 1e6 << "M, relative difference "
                << std::setprecision(4) << std::abs(static_cast<double>(count) - p.count) / p.count << '\n';
      return kExitOk;
    }
  }
  std::cout << "no published count for this configuration\n";
  return kExitOk;
}

int cmd_grad_check(const CommonArgs& args) {
  Resolved r = resolve(args, "desk");
  write_snapshot(args, r.kv);
  GradSuiteOptions opts;
  opts.seed = r.training().seed;
  bool ok = true;
  for (const auto& b : gradient_suite(r.model(), opts)) {
    const bool pass = b.result.max_rel_error <= opts.tolerance;
    ok = ok && pass;
    std::cout << std::left << std::setw(10) << b.block << " max relative error " << std::scientific
              << std::setprecision(3) << b.result.max_rel_error << " (" << b.result.probes << " probes)"
              << "  worst " << b.result.worst_leaf << "[" << b.result.worst_index << "] autodiff "
              << b.result.worst_analytic << " numeric " << b.result.worst_numeric << (pass ? "" : "  FAILED") << '\n';
  }
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_self_test(const CommonArgs& args) {
  Resolved r = resolve(args, "desk");
  write_snapshot(args, r.kv);
  bool ok = true;
  for (const auto& c : self_test(r.model(), r.training().seed)) {
    ok = ok && c.passed;
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << (c.detail.empty() ? "" : ": " + c.detail) << '\n';
  }
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stereo image super-resolution: training, evaluation and diagnostics"};
  app.require_subcommand(1);
  CommonArgs args;
  std::function<int(const CommonArgs&)> command;

  auto add = [&](const std::string& name, const std::string& help, int (*fn)(const CommonArgs&),
                 bool wants_checkpoint) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", args.config_path, "key = value configuration file");
    sub->add_option("--out", args.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", args.seed, "seed for initialization, shuffling and augmentation");
    sub->add_option("--threads", args.threads, "worker threads (results depend on the count)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--override", args.overrides, "key=value, repeatable; keys may drop their prefix");
    sub->add_option("--preset", args.preset, "architecture preset")->check(CLI::IsMember({"T", "S", "desk"}));
    if (wants_checkpoint) sub->add_option("--checkpoint", args.checkpoint, "trained checkpoint");
    sub->callback([&command, fn] { command = fn; });
  };
  add("train", "train on a stereo dataset", cmd_train, false);
  add("eval", "score a checkpoint on a stereo dataset", cmd_eval, true);
  add("infer", "super-resolve low-resolution pairs", cmd_infer, true);
  add("param-count", "print the parameter count", cmd_param_count, false);
  add("grad-check", "finite-difference gradient check of every block", cmd_grad_check, false);
  add("self-test", "run the built-in invariant checks", cmd_self_test, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }
  try {
    return command(args);
  } catch (const NumericError& e) {
    log::error(e.what());
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitBadInput;
  }
}
