// SPDX-License-Identifier: Apache-2.0
#include "mssf/diagnostics.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "mssf/config.hpp"
#include "mssf/data/dataset.hpp"
#include "mssf/data/resize.hpp"
#include "mssf/fft.hpp"
#include "mssf/model/checkpoint.hpp"
#include "mssf/ops.hpp"
#include "mssf/train/metrics.hpp"
#include "mssf/train/optim.hpp"

namespace mssf {

namespace {

TensorD uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& e : v) e = dist(rng);
  return TensorD(std::move(shape), std::move(v));
}

// Moves every parameter away from its initial value; gains stay near one.
void scramble(nn::ParamStore<double>& store, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  for (const auto& e : store.entries()) {
    auto t = e.value;
    const double base = e.init == nn::Init::ones ? 1.0 : 0.0;
    for (auto& v : t.mutable_data()) v = base + dist(rng);
  }
}

GradCheckResult check_store(nn::ParamStore<double>& store, std::vector<TensorD> inputs,
                            const std::function<TensorD()>& loss, std::size_t probes, const GradSuiteOptions& suite) {
  auto leaves = store.tensors();
  std::vector<std::string> names;
  for (const auto& e : store.entries()) names.push_back(e.name);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    inputs[i].set_requires_grad(true);
    leaves.push_back(inputs[i]);
    names.push_back("input" + std::to_string(i));
  }
  GradCheckOptions opts;
  opts.max_probes_per_leaf = probes;
  opts.seed = suite.seed;
  opts.step = suite.step;
  return gradient_check(leaves, names, loss, opts);
}

double max_diff(const TensorD& a, const TensorD& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

template <typename T>
bool identical(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i)
    if (a.data()[i] != b.data()[i]) return false;
  return true;
}

template <typename T>
void zero_store(nn::ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    auto t = e.value;
    for (auto& v : t.mutable_data()) v = T(0);
  }
}

// sum_k <w_k, y_k - y_k at the current parameters>. Same gradient as the plain
// weighted sum; subtracting the baseline keeps finite-difference roundoff small.
std::function<TensorD()> anchored_probe(std::function<std::vector<TensorD>()> outputs, std::vector<TensorD> weights) {
  std::vector<TensorD> base;
  {
    NoGradGuard no_grad;
    for (const auto& y : outputs()) base.push_back(y.detach());
  }
  return [outputs = std::move(outputs), weights = std::move(weights), base = std::move(base)] {
    const auto ys = outputs();
    auto total = weighted_sum(sub(ys[0], base[0]), weights[0]);
    for (std::size_t k = 1; k < ys.size(); ++k) total = add(total, weighted_sum(sub(ys[k], base[k]), weights[k]));
    return total;
  };
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

std::vector<BlockGradReport> gradient_suite(const ModelConfig& config, const GradSuiteOptions& options) {
  config.validate();
  std::mt19937_64 rng(options.seed);
  const std::size_t c = config.channels;
  const Shape feat{1, c, 4, 6};
  std::vector<BlockGradReport> out;

  {
    nn::ParamStore<double> store;
    nn::MixedScaleBlock<double> msb(store, "msb", c, config.msb);
    scramble(store, rng);
    const auto x = uniform(feat, rng, -1, 1), w = uniform(feat, rng, -1, 1);
    out.push_back({"msb", check_store(store, {x}, anchored_probe([&] { return std::vector{msb(x)}; }, {w}), 0, options)});
  }
  {
    nn::ParamStore<double> store;
    nn::SelectiveFusionAttention<double> sfam(
        store, "sfam", c,
        nn::SfamOptions{config.sfam_reduction, config.sfam_variant, config.attention_scope, config.selection});
    scramble(store, rng);
    const auto l = uniform(feat, rng, -1, 1), r = uniform(feat, rng, -1, 1);
    const auto wl = uniform(feat, rng, -1, 1), wr = uniform(feat, rng, -1, 1);
    out.push_back({"sfam", check_store(store, {l, r},
                                       anchored_probe(
                                           [&] {
                                             const auto [fl, fr] = sfam(l, r);
                                             return std::vector{fl, fr};
                                           },
                                           {wl, wr}),
                                       0, options)});
  }
  if (config.ffcb_early || config.ffcb_final) {
    nn::ParamStore<double> store;
    nn::FourierConvBlock<double> ffcb(store, "ffcb", c, config.ffcb_expansion);
    scramble(store, rng);
    const auto x = uniform(feat, rng, -1, 1), w = uniform(feat, rng, -1, 1);
    out.push_back({"ffcb", check_store(store, {x}, anchored_probe([&] { return std::vector{ffcb(x)}; }, {w}), 0, options)});
  }
  {
    nn::ParamStore<double> store;
    nn::Upsampler<double> up(store, "upsampler", c, config.scale);
    scramble(store, rng);
    const auto x = uniform(feat, rng, -1, 1);
    const auto w = uniform({1, 3, 4 * config.scale, 6 * config.scale}, rng, -1, 1);
    out.push_back({"upsampler", check_store(store, {x}, anchored_probe([&] { return std::vector{up(x)}; }, {w}), 0, options)});
  }
  {
    Model<double> model(config);
    scramble(model.params(), rng);
    const auto l = uniform({1, 3, 4, 6}, rng, 0, 1), r = uniform({1, 3, 4, 6}, rng, 0, 1);
    const Shape hr{1, 3, 4 * config.scale, 6 * config.scale};
    const auto wl = uniform(hr, rng, -1, 1), wr = uniform(hr, rng, -1, 1);
    out.push_back({"model", check_store(model.params(), {l, r},
                                        anchored_probe(
                                            [&] {
                                              const auto o = model.forward(l, r);
                                              return std::vector{o.left, o.right};
                                            },
                                            {wl, wr}),
                                        options.model_probes_per_leaf, options)});
  }
  return out;
}

std::vector<CheckOutcome> self_test(const ModelConfig& config, std::uint64_t seed) {
  std::vector<CheckOutcome> out;
  auto run = [&](const std::string& name, const std::function<std::string()>& fn) {
    try {
      const std::string failure = fn();
      out.push_back({name, failure.empty(), failure});
    } catch (const std::exception& e) {
      out.push_back({name, false, std::string("threw: ") + e.what()});
    }
  };
  std::mt19937_64 rng(seed);

  run("fft round trip", [&]() -> std::string {
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {7, 9}}) {
      const auto x = uniform({1, 2, h, w}, rng, -1, 1);
      const double err = max_diff(irfft2(rfft2(x), h, w), x);
      if (err > 1e-10) return "error " + fmt(err) + " on " + std::to_string(h) + "x" + std::to_string(w);
    }
    return {};
  });

  run("zero mixed-scale block is the identity", [&]() -> std::string {
    nn::ParamStore<double> store;
    nn::MixedScaleBlock<double> msb(store, "msb", config.channels, config.msb);
    zero_store(store);
    const auto x = uniform({1, config.channels, 5, 7}, rng, -1, 1);
    return identical(msb(x), x) ? "" : "output differs from input";
  });

  run("cross-view fusion starts as the identity", [&]() -> std::string {
    nn::ParamStore<double> store;
    nn::SelectiveFusionAttention<double> sfam(
        store, "sfam", config.channels,
        nn::SfamOptions{config.sfam_reduction, config.sfam_variant, config.attention_scope, config.selection});
    store.initialize(seed);
    const auto l = uniform({1, config.channels, 3, 5}, rng, -1, 1), r = uniform({1, config.channels, 3, 5}, rng, -1, 1);
    const auto [fl, fr] = sfam(l, r);
    return identical(fl, l) && identical(fr, r) ? "" : "fused output differs from the inputs";
  });

  run("attention rows sum to one", [&]() -> std::string {
    TensorD weights;
    const auto q = uniform({2, 4, 3, 6}, rng, -2, 2), k = uniform({2, 4, 3, 6}, rng, -2, 2);
    nn::cross_attention(q, k, k, nn::AttentionScope::epipolar_row, &weights);
    const std::size_t cols = weights.dim(2);
    for (std::size_t row = 0; row < weights.numel() / cols; ++row) {
      double s = 0;
      for (std::size_t j = 0; j < cols; ++j) s += weights.data()[row * cols + j];
      if (std::abs(s - 1.0) > 1e-6) return "row " + std::to_string(row) + " sums to " + fmt(s);
    }
    return {};
  });

  run("zero network returns the bilinear upsample", [&]() -> std::string {
    Model<float> model(config);
    zero_store(model.params());
    TensorF l({1, 3, 6, 10}), r({1, 3, 6, 10});
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : l.mutable_data()) v = u(rng);
    for (auto& v : r.mutable_data()) v = u(rng);
    const auto o = model.forward(l, r);
    return identical(o.left, bilinear_upsample(l, config.scale)) &&
                   identical(o.right, bilinear_upsample(r, config.scale))
               ? ""
               : "output differs from the bilinear upsample";
  });

  run("metric closed forms", [&]() -> std::string {
    const auto a = TensorF::full({3, 16, 16}, 0.25f), b = TensorF::full({3, 16, 16}, 0.75f);
    const double p = train::psnr(a, b);
    if (std::abs(p - 10.0 * std::log10(4.0)) > 1e-4) return "psnr " + fmt(p);
    TensorF x({3, 16, 16});
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (auto& v : x.mutable_data()) v = u(rng);
    if (train::ssim(x, x) != 1.0) return "ssim(x,x) = " + fmt(train::ssim(x, x));
    return {};
  });

  run("learning-rate schedule endpoints", []() -> std::string {
    if (train::cosine_lr(0, 2000) != 1e-3 || train::cosine_lr(2000, 2000) != 1e-7) return "endpoints are not exact";
    return {};
  });

  run("checkpoint round trip", [&]() -> std::string {
    Model<float> a(config), b(config);
    a.initialize(seed + 1);
    std::stringstream first, second;
    save_checkpoint(first, a, 3);
    load_checkpoint(first, b);
    save_checkpoint(second, b, 3);
    return first.str() == second.str() ? "" : "re-saved checkpoint differs";
  });

  run("bicubic resize preserves constants", []() -> std::string {
    const auto out = data::bicubic_resize(TensorF::full({3, 9, 13}, 0.3f), 4, 6);
    for (float v : out.data())
      if (std::abs(v - 0.3f) > 1e-6f) return "value " + fmt(v);
    return {};
  });

  run("horizontal flip is an involution", [&]() -> std::string {
    data::PatchRecord rec;
    auto make = [&](std::size_t h, std::size_t w) {
      TensorF t({3, h, w});
      std::uniform_real_distribution<float> u(0.0f, 1.0f);
      for (auto& v : t.mutable_data()) v = u(rng);
      return t;
    };
    rec.lr_left = make(3, 5);
    rec.lr_right = make(3, 5);
    rec.hr_left = make(6, 10);
    rec.hr_right = make(6, 10);
    data::AugRecord flip;
    flip.hflip = true;
    const auto twice = data::apply_augmentation(data::apply_augmentation(rec, flip), flip);
    return identical(twice.lr_left, rec.lr_left) && identical(twice.hr_right, rec.hr_right) ? "" : "not restored";
  });

  GradSuiteOptions gopts;
  gopts.seed = seed;
  for (const auto& r : gradient_suite(config, gopts)) {
    const bool ok = r.result.max_rel_error <= gopts.tolerance;
    out.push_back({"gradient " + r.block, ok,
                   ok ? "" : "max relative error " + fmt(r.result.max_rel_error) + " at " + r.result.worst_leaf});
  }
  return out;
}

}  // namespace mssf
