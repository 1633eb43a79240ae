// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "mssf/diagnostics.hpp"
#include "mssf/fft.hpp"
#include "mssf/model/checkpoint.hpp"
#include "mssf/ops.hpp"
#include "mssf/parallel.hpp"
#include "mssf/train/evaluate.hpp"
#include "mssf/train/metrics.hpp"
#include "mssf/train/trainer.hpp"
#include "support.hpp"

using namespace mssf;
using mssf::testing::bitwise_equal;
using mssf::testing::random_tensor;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail << " [threw: " << e.what() << "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!o.pass) ++failures;
  std::printf("%s %d %s:%s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.str().c_str(), secs);
  std::fflush(stdout);
}

template <typename T>
void zero_all(nn::ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    auto t = e.value;
    for (auto& v : t.mutable_data()) v = T(0);
  }
}

TensorF as_batch(const TensorF& img) {
  return TensorF({1, img.dim(0), img.dim(1), img.dim(2)}, std::vector<float>(img.data().begin(), img.data().end()));
}

TensorF unbatch(const TensorF& t) {
  return TensorF({t.dim(1), t.dim(2), t.dim(3)}, std::vector<float>(t.data().begin(), t.data().end()));
}

// Textured synthetic scene; the right view is the left one shifted by
// `disparity` columns.
TensorF scene(std::size_t h, std::size_t w, double disparity) {
  TensorF t({3, h, w});
  auto d = t.mutable_data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double u = static_cast<double>(x) + disparity, v = static_cast<double>(y);
        const bool cell = (static_cast<int>(u / 12) + static_cast<int>(v / 12)) % 2 != 0;
        d[(c * h + y) * w + x] = static_cast<float>(0.5 + 0.2 * std::sin(0.21 * u + 0.7 * c) * std::cos(0.17 * v) +
                                                    0.15 * std::sin(0.005 * u * v + c) + (cell ? 0.08 : -0.08));
      }
  return t;
}

struct OverfitRun {
  std::string checkpoint;
  double final_loss = 0.0;
  double psnr_model = 0.0;
  double psnr_bilinear = 0.0;
};

OverfitRun overfit_once(const data::StereoPair& pair, std::uint64_t iters) {
  Model<float> model(ModelConfig::preset("desk", 2));
  model.initialize(0);
  const auto records = data::extract_patches(pair, data::PatchOptions{24, 72, 20});
  train::TrainConfig cfg;
  cfg.total_iters = iters;
  cfg.batch = 1;
  cfg.augment = data::AugmentOptions{false, false, false};
  cfg.seed = 0;
  OverfitRun run;
  OptimizerState final_state;
  train::TrainHooks hooks;
  hooks.on_checkpoint = [&](std::uint64_t, const OptimizerState& s) { final_state = s; };
  train::train(model, records, cfg, hooks);

  std::ostringstream os;
  save_checkpoint(os, model, iters, &final_state);
  run.checkpoint = os.str();

  NoGradGuard no_grad;
  const auto out = model.forward(as_batch(pair.lr.left), as_batch(pair.lr.right));
  run.final_loss = train::l1_loss(out.left, out.right, as_batch(pair.hr.left), as_batch(pair.hr.right)).item();
  const auto sr = train::super_resolve(model, pair.lr);
  run.psnr_model = 0.5 * (train::psnr(pair.hr.left, sr.left) + train::psnr(pair.hr.right, sr.right));
  const auto bl = unbatch(bilinear_upsample(as_batch(pair.lr.left), 2));
  const auto br = unbatch(bilinear_upsample(as_batch(pair.lr.right), 2));
  run.psnr_bilinear = 0.5 * (train::psnr(pair.hr.left, bl) + train::psnr(pair.hr.right, br));
  return run;
}

std::vector<data::PatchRecord> tiny_records(std::mt19937_64& rng) {
  std::vector<data::PatchRecord> out;
  for (int i = 0; i < 2; ++i) {
    data::PatchRecord r;
    r.id = "r" + std::to_string(i);
    r.scale = 2;
    r.lr_left = random_tensor<float>({3, 4, 6}, rng, 0, 1);
    r.lr_right = random_tensor<float>({3, 4, 6}, rng, 0, 1);
    r.hr_left = random_tensor<float>({3, 8, 12}, rng, 0, 1);
    r.hr_right = random_tensor<float>({3, 8, 12}, rng, 0, 1);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

int main() {
  set_num_threads(1);
  std::mt19937_64 rng(2024);

  criterion(1, "parameter counts", [](Outcome& o) {
    struct Row {
      const char* preset;
      std::size_t scale;
      double published;
    };
    std::size_t counts[4];
    int i = 0;
    for (const Row& r : {Row{"T", 2, 0.57e6}, {"T", 4, 0.59e6}, {"S", 2, 1.80e6}, {"S", 4, 1.82e6}}) {
      const Model<float> m(ModelConfig::preset(r.preset, r.scale));
      counts[i++] = m.count_params();
      const double rel = std::abs(double(m.count_params()) - r.published) / r.published;
      o.detail << ' ' << r.preset << "x" << r.scale << '=' << m.count_params();
      o.require(rel <= 0.05, std::string(r.preset) + " x" + std::to_string(r.scale) + " outside 5%");
    }
    o.require(counts[0] < counts[2] && counts[1] < counts[3], "T is not smaller than S");
    o.require(counts[0] < counts[1] && counts[2] < counts[3], "x2 is not smaller than x4");
  });

  criterion(2, "gradient suite", [](Outcome& o) {
    for (const auto& b : gradient_suite(ModelConfig::preset("desk", 2))) {
      o.detail << ' ' << b.block << '=' << b.result.max_rel_error;
      o.require(b.result.max_rel_error <= 1e-4, b.block);
    }
  });

  criterion(3, "zero-init identities", [&](Outcome& o) {
    {
      nn::ParamStore<float> store;
      nn::SelectiveFusionAttention<float> sfam(store, "sfam", 16, nn::SfamOptions{});
      store.initialize(1);
      const auto l = random_tensor<float>({2, 16, 5, 9}, rng), r = random_tensor<float>({2, 16, 5, 9}, rng);
      const auto [fl, fr] = sfam(l, r);
      o.require(bitwise_equal(fl, l) && bitwise_equal(fr, r), "fusion with zero lambda");
    }
    {
      Model<float> model(ModelConfig::preset("desk", 2));
      model.initialize(1);
      for (const auto& e : model.params().entries())
        if (e.name.starts_with("head.")) {
          auto t = e.value;
          for (auto& v : t.mutable_data()) v = 0.0f;
        }
      const auto l = random_tensor<float>({1, 3, 12, 20}, rng, 0, 1), r = random_tensor<float>({1, 3, 12, 20}, rng, 0, 1);
      const auto out = model.forward(l, r);
      o.require(bitwise_equal(out.left, bilinear_upsample(l, 2)) && bitwise_equal(out.right, bilinear_upsample(r, 2)),
                "zero head gives bilinear");
    }
    {
      nn::ParamStore<float> store;
      nn::MixedScaleBlock<float> msb(store, "msb", 16, nn::MsbBranchSpec{});
      zero_all(store);
      const auto x = random_tensor<float>({1, 16, 7, 11}, rng);
      o.require(bitwise_equal(msb(x), x), "zero block is identity");
    }
  });

  criterion(4, "attention properties", [&](Outcome& o) {
    double worst = 0;
    for (auto scope : {nn::AttentionScope::epipolar_row, nn::AttentionScope::global}) {
      TensorD weights;
      const auto q = random_tensor<double>({2, 8, 5, 7}, rng, -3, 3), k = random_tensor<double>({2, 8, 5, 7}, rng, -3, 3);
      nn::cross_attention(q, k, k, scope, &weights);
      const std::size_t cols = weights.dim(2);
      for (std::size_t row = 0; row < weights.numel() / cols; ++row) {
        double s = 0;
        for (std::size_t j = 0; j < cols; ++j) s += weights.data()[row * cols + j];
        worst = std::max(worst, std::abs(s - 1.0));
      }
    }
    o.detail << " row-sum error " << worst;
    o.require(worst <= 1e-6, "row-stochastic");

    // Perturb one row of the right view and watch the left output.
    nn::ParamStore<double> store;
    nn::SfamOptions direct;
    direct.selection = false;
    nn::SelectiveFusionAttention<double> sfam(store, "sfam", 8, direct);
    store.initialize(3);
    for (const auto& e : store.entries())
      if (e.name.find("lambda") != std::string::npos) {
        auto t = e.value;
        for (auto& v : t.mutable_data()) v = 0.7;
      }
    const std::size_t h = 6, w = 9, row = 4;
    const auto l = random_tensor<double>({1, 8, h, w}, rng), r = random_tensor<double>({1, 8, h, w}, rng);
    TensorD r2 = r.clone();
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t x = 0; x < w; ++x) r2.mutable_data()[(c * h + row) * w + x] += 0.5;
    const auto a = sfam(l, r).first, b = sfam(l, r2).first;
    bool local = true, changed = false;
    for (std::size_t c = 0; c < 8; ++c)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = (c * h + y) * w + x;
          if (y != row && a.data()[i] != b.data()[i]) local = false;
          if (y == row && a.data()[i] != b.data()[i]) changed = true;
        }
    o.require(local && changed, "epipolar locality");

    const auto q1 = random_tensor<double>({2, 4, 3, 1}, rng), k1 = random_tensor<double>({2, 4, 3, 1}, rng),
               v1 = random_tensor<double>({2, 4, 3, 1}, rng);
    o.require(bitwise_equal(nn::cross_attention(q1, k1, v1, nn::AttentionScope::epipolar_row), v1), "W=1 returns V");
  });

  criterion(5, "fft contracts", [&](Outcome& o) {
    double worst = 0;
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {7, 9}}) {
      const auto x = random_tensor<double>({1, 3, h, w}, rng);
      worst = std::max(worst, mssf::testing::max_abs_diff(irfft2(rfft2(x), h, w), x));
    }
    o.detail << " round trip " << worst;
    o.require(worst <= 1e-10, "round trip");
    const auto x = random_tensor<double>({1, 1, 4, 4}, rng);
    const auto s = rfft2(x);
    double energy = 0, half = 0, dense = 0;
    for (double v : x.data()) energy += v * v;
    for (std::size_t k = 0; k < 4; ++k)
      for (std::size_t l = 0; l < 3; ++l)
        half += (l == 1 ? 2.0 : 1.0) * (std::pow(s.real.data()[k * 3 + l], 2) + std::pow(s.imag.data()[k * 3 + l], 2));
    for (auto z : mssf::testing::dense_dft2(x.data().data(), 4, 4)) dense += std::norm(z);
    const double gap = std::max(std::abs(energy - half / 16), std::abs(half - dense));
    o.detail << ", Parseval " << gap;
    o.require(gap <= 1e-10, "Parseval");
  });

  criterion(6, "metric oracles", [&](Outcome& o) {
    const auto a = random_tensor<float>({3, 16, 16}, rng, 0, 0.5);
    const auto b = add(a, TensorF::full(a.shape(), 0.5f));
    const double p = train::psnr(a, b);
    o.detail << " psnr " << p;
    o.require(std::abs(p - 6.0206) <= 1e-4, "psnr");
    o.require(train::ssim(a, a) == 1.0 && train::ssim(b, b) == 1.0, "ssim(x,x)");
    double worst = 0;
    for (int i = 0; i < 3; ++i) {
      const auto x = random_tensor<float>({3, 16, 16}, rng, 0, 1), y = random_tensor<float>({3, 16, 16}, rng, 0, 1);
      worst = std::max(worst, std::abs(train::ssim(x, y) - mssf::testing::naive_ssim(x, y)));
    }
    o.detail << ", ssim vs oracle " << worst;
    o.require(worst <= 1e-6, "ssim oracle");
  });

  // Criteria 7 and 9 share the two full overfit runs.
  const data::StereoImage hr{"synthetic", scene(48, 144, 0.0), scene(48, 144, 4.0)};
  const data::StereoPair pair = data::synthesize_pair(hr, 2);
  OverfitRun first, second;
  bool runs_ok = true;
  std::string run_error;
  try {
    first = overfit_once(pair, 2000);
    second = overfit_once(pair, 2000);
  } catch (const std::exception& e) {
    runs_ok = false;
    run_error = e.what();
  }

  criterion(7, "overfit", [&](Outcome& o) {
    o.require(runs_ok, "training threw: " + run_error);
    o.detail << " L1 " << first.final_loss << ", PSNR " << first.psnr_model << " vs bilinear " << first.psnr_bilinear;
    o.require(first.final_loss < 0.01, "L1 below 0.01");
    o.require(first.psnr_model >= first.psnr_bilinear + 5.0, "PSNR gain of 5 dB");
  });

  criterion(8, "ablation harness", [&](Outcome& o) {
    std::vector<std::pair<std::string, ModelConfig>> variants;
    auto base = ModelConfig::preset("desk", 2);
    base.channels = 8;
    base.blocks = 1;
    auto v = base;
    v.selection = false;
    variants.emplace_back("no-selection", v);
    const std::vector<std::size_t> kernels{3, 5, 7, 9};
    for (std::size_t n = 1; n <= 4; ++n) {
      v = base;
      v.msb.kernels.assign(kernels.begin(), kernels.begin() + static_cast<std::ptrdiff_t>(n));
      variants.emplace_back("branches=" + std::to_string(n), v);
    }
    for (int placement = 0; placement < 4; ++placement) {
      v = base;
      v.ffcb_early = placement & 1;
      v.ffcb_final = placement & 2;
      variants.emplace_back(std::string("ffcb=") + (v.ffcb_early ? "E" : "-") + (v.ffcb_final ? "F" : "-"), v);
    }
    const auto records = tiny_records(rng);
    for (const auto& [name, cfg] : variants) {
      Model<float> model(cfg);
      model.initialize(5);
      train::TrainConfig tc;
      tc.total_iters = 1;
      tc.batch = 2;
      const auto result = train::train(model, records, tc);
      o.require(std::isfinite(result.trace.front().loss), name + " one step");
      double worst = 0;
      for (const auto& b : gradient_suite(cfg)) worst = std::max(worst, b.result.max_rel_error);
      o.require(worst <= 1e-4, name + " gradients");
      o.detail << ' ' << name;
    }
  });

  criterion(9, "determinism", [&](Outcome& o) {
    o.require(runs_ok, "training threw: " + run_error);
    o.detail << " checkpoint bytes " << first.checkpoint.size();
    o.require(!first.checkpoint.empty() && first.checkpoint == second.checkpoint, "identical checkpoints");
  });

  criterion(10, "schedule endpoints", [](Outcome& o) {
    const double start = train::cosine_lr(0, 2000), end = train::cosine_lr(2000, 2000);
    o.detail << " lr(0)=" << start << " lr(T)=" << end;
    o.require(start == 1e-3 && end == 1e-7, "exact endpoints");
  });

  return failures == 0 ? 0 : 1;
}
