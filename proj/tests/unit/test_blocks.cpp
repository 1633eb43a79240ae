// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>

#include "mssf/gradcheck.hpp"
#include "mssf/nn/blocks.hpp"
#include "reference.hpp"
#include "support.hpp"

using namespace mssf;
using namespace mssf::nn;
using mssf::testing::bitwise_equal;
using mssf::testing::max_abs_diff;
using mssf::testing::random_tensor;
namespace ref = mssf::testing::ref;

namespace {

void randomize(ParamStore<double>& store, std::mt19937_64& rng, double spread = 0.5) {
  std::uniform_real_distribution<double> dist(-spread, spread);
  for (const auto& e : store.entries()) {
    auto t = e.value;
    const bool gain = e.name.ends_with(".gamma");
    for (auto& v : t.mutable_data()) v = (gain ? 1.0 : 0.0) + dist(rng);
  }
}

template <typename T>
void zero_all(ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    auto t = e.value;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), T(0));
  }
}

void expect_grad_ok(ParamStore<double>& store, std::vector<TensorD> inputs, const std::function<TensorD()>& loss,
                    std::size_t probes = 0) {
  auto leaves = store.tensors();
  std::vector<std::string> names;
  for (const auto& e : store.entries()) names.push_back(e.name);
  for (auto& x : inputs) {
    leaves.push_back(x);
    names.push_back("input");
  }
  GradCheckOptions opts;
  opts.max_probes_per_leaf = probes;
  auto r = gradient_check(leaves, names, loss, opts);
  INFO("worst " << r.worst_leaf << "[" << r.worst_index << "] rel " << r.max_rel_error);
  CHECK(r.max_rel_error <= 1e-4);
}

}  // namespace

TEST_SUITE("simple gate and channel attention") {
  TEST_CASE("simple gate examples") {
    CHECK(simple_gate(TensorD({1, 4, 2, 2}, 1.0)).data()[0] == 1.0);
    auto y = simple_gate(TensorD({1, 2, 1, 1}, std::vector<double>{2.0, 3.0}));
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 6.0);
    std::vector<double> v(8, 0.0);
    std::fill(v.begin(), v.begin() + 4, 5.0);
    const auto gated = simple_gate(TensorD({1, 2, 2, 2}, v));
    for (double e : gated.data()) CHECK(e == 0.0);
    CHECK_THROWS_AS(simple_gate(TensorD({1, 3, 2, 2})), ConfigError);
  }

  TEST_CASE("channel attention examples") {
    ParamStore<double> store;
    Conv<double> gate(store, "gate", 2, 2);
    TensorD x({1, 2, 3, 3});
    for (std::size_t i = 0; i < 9; ++i) {
      x.mutable_data()[i] = 0.5;
      x.mutable_data()[9 + i] = -2.0;
    }
    // identity 1x1 weight: gate equals the channel value, so out = v^2
    gate.weight.mutable_data()[0] = 1.0;
    gate.weight.mutable_data()[3] = 1.0;
    auto y = sca(x, gate);
    CHECK(y.at(0, 0, 1, 1) == doctest::Approx(0.25));
    CHECK(y.at(0, 1, 2, 0) == doctest::Approx(4.0));
    std::fill(gate.weight.mutable_data().begin(), gate.weight.mutable_data().end(), 0.0);
    std::fill(gate.bias.mutable_data().begin(), gate.bias.mutable_data().end(), 1.0);
    CHECK(bitwise_equal(sca(x, gate), x));
    std::fill(gate.bias.mutable_data().begin(), gate.bias.mutable_data().end(), 0.0);
    const auto off = sca(x, gate);
    for (double e : off.data()) CHECK(e == 0.0);
  }
}

TEST_SUITE("mixed-scale block") {
  TEST_CASE("parameter names and shapes follow the branch spec") {
    ParamStore<double> store;
    MixedScaleBlock<double> block(store, "m", 48, MsbBranchSpec{});
    CHECK(store.at("m.stage1.expand.weight").shape() == Shape{72, 48, 1, 1});
    CHECK(store.at("m.stage2.branch1.dwc.weight").shape() == Shape{72, 1, 5, 5});
    CHECK(store.at("m.stage2.branch0.mix_dwc.weight").shape() == Shape{72, 1, 3, 3});
    CHECK(store.at("m.stage2.fuse.weight").shape() == Shape{48, 72, 1, 1});
    CHECK_THROWS_AS(MixedScaleBlock<double>(store, "bad", 8, MsbBranchSpec{{3, 4}, 1.5}), ConfigError);
    CHECK_THROWS_AS(MixedScaleBlock<double>(store, "bad2", 8, MsbBranchSpec{{}, 1.5}), ConfigError);
  }

  TEST_CASE("zero parameters give the identity") {
    ParamStore<float> store;
    MixedScaleBlock<float> block(store, "m", 48, MsbBranchSpec{});
    zero_all(store);
    std::mt19937_64 rng(1);
    auto x = random_tensor<float>({1, 48, 30, 90}, rng);
    auto y = block(x);
    CHECK(y.shape() == x.shape());
    CHECK(bitwise_equal(y, x));
  }

  TEST_CASE("matches the straight-line reference") {
    std::mt19937_64 rng(21);
    ParamStore<double> store;
    MixedScaleBlock<double> block(store, "m", 4, MsbBranchSpec{});
    randomize(store, rng);
    auto x = random_tensor({1, 4, 6, 6}, rng);
    CHECK(ref::max_diff(ref::msb(ref::Map(x), store, "m"), block(x)) <= 1e-5);
  }

  TEST_CASE("channel mismatch") {
    ParamStore<double> store;
    MixedScaleBlock<double> block(store, "m", 4, MsbBranchSpec{});
    CHECK_THROWS_AS(block(TensorD({1, 6, 3, 3})), ConfigError);
  }

  TEST_CASE("branch counts one to four keep the shape") {
    std::mt19937_64 rng(5);
    for (std::size_t nb = 1; nb <= 4; ++nb) {
      MsbBranchSpec spec;
      spec.kernels.clear();
      for (std::size_t b = 0; b < nb; ++b) spec.kernels.push_back(3 + 2 * b);
      ParamStore<double> store;
      MixedScaleBlock<double> block(store, "m", 4, spec);
      store.initialize(3);
      auto x = random_tensor({1, 4, 5, 7}, rng);
      CHECK(block(x).shape() == x.shape());
    }
  }

  TEST_CASE("gradient check") {
    std::mt19937_64 rng(8);
    ParamStore<double> store;
    MixedScaleBlock<double> block(store, "m", 2, MsbBranchSpec{});
    randomize(store, rng);
    auto x = random_tensor({1, 2, 4, 6}, rng);
    auto w = random_tensor({1, 2, 4, 6}, rng);
    expect_grad_ok(store, {x}, [&] { return weighted_sum(block(x), w); });
  }
}

TEST_SUITE("selective fusion attention") {
  TEST_CASE("zero descriptor convs give uniform descriptors") {
    std::mt19937_64 rng(2);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    randomize(store, rng);
    for (auto name : {"s.desc_left.weight", "s.desc_left.bias", "s.desc_right.weight", "s.desc_right.bias"}) {
      auto t = store.at(name);
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
    }
    auto xl = random_tensor({1, 4, 3, 5}, rng), xr = random_tensor({1, 4, 3, 5}, rng);
    auto [dl, dr] = sfam.descriptors(xl, xr);
    for (double v : dl.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
    auto [ql, qr] = sfam.select(xl, xr);
    const auto nl = ref::layer_norm(ref::Map(xl), store, "s.norm_left");
    for (std::size_t i = 0; i < nl.v.size(); ++i) CHECK(std::abs(ql.data()[i] - nl.v[i] * 1.25) <= 1e-12);
  }

  TEST_CASE("descriptors sum to one along channels and ignore logit shifts") {
    std::mt19937_64 rng(3);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 6, {});
    randomize(store, rng, 2.0);
    auto xl = random_tensor({2, 6, 3, 4}, rng), xr = random_tensor({2, 6, 3, 4}, rng);
    auto [dl, dr] = sfam.descriptors(xl, xr);
    for (std::size_t n = 0; n < 2; ++n) {
      double sl = 0, sr = 0;
      for (std::size_t c = 0; c < 6; ++c) {
        sl += dl.data()[n * 6 + c];
        sr += dr.data()[n * 6 + c];
        CHECK(dl.data()[n * 6 + c] >= 0.0);
      }
      CHECK(std::abs(sl - 1.0) <= 1e-12);
      CHECK(std::abs(sr - 1.0) <= 1e-12);
    }
    auto bias = store.at("s.desc_left.bias");
    for (auto& v : bias.mutable_data()) v += 7.5;
    auto [dl2, dr2] = sfam.descriptors(xl, xr);
    CHECK(max_abs_diff(dl, dl2) <= 1e-14);
    CHECK(bitwise_equal(dr, dr2));
  }

  TEST_CASE("identical views share the joint statistic") {
    std::mt19937_64 rng(4);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    randomize(store, rng);
    // tie the per-view norms so LN(xl) == LN(xr)
    for (auto part : {".gamma", ".beta"}) {
      auto r = store.at(std::string("s.norm_right") + part);
      auto l = store.at(std::string("s.norm_left") + part);
      std::copy(l.data().begin(), l.data().end(), r.mutable_data().begin());
    }
    auto x = random_tensor({1, 4, 3, 3}, rng);
    auto [ql, qr] = sfam.select(x, x);
    CHECK_FALSE(bitwise_equal(ql, qr));
    for (auto part : {".weight", ".bias"}) {
      auto r = store.at(std::string("s.desc_right") + part);
      auto l = store.at(std::string("s.desc_left") + part);
      std::copy(l.data().begin(), l.data().end(), r.mutable_data().begin());
    }
    auto [ql2, qr2] = sfam.select(x, x);
    CHECK(bitwise_equal(ql2, qr2));
  }

  TEST_CASE("zero lambda returns the inputs exactly") {
    std::mt19937_64 rng(5);
    ParamStore<float> store;
    SelectiveFusionAttention<float> sfam(store, "s", 8, {});
    store.initialize(11);
    auto xl = random_tensor<float>({2, 8, 5, 7}, rng), xr = random_tensor<float>({2, 8, 5, 7}, rng);
    auto [fl, fr] = sfam(xl, xr);
    CHECK(bitwise_equal(fl, xl));
    CHECK(bitwise_equal(fr, xr));
  }

  TEST_CASE("single column attends with weight one") {
    std::mt19937_64 rng(6);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    randomize(store, rng);
    for (auto name : {"s.lambda_left", "s.lambda_right"}) {
      auto t = store.at(name);
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 1.0);
    }
    auto xl = random_tensor({1, 4, 3, 1}, rng), xr = random_tensor({1, 4, 3, 1}, rng);
    AttentionTrace<double> trace;
    auto [fl, fr] = sfam(xl, xr, &trace);
    for (double a : trace.into_left.data()) CHECK(a == 1.0);
    auto value_right = conv2d(xr, store.at("s.value_right.weight"), store.at("s.value_right.bias"));
    CHECK(bitwise_equal(fl, add(xl, value_right)));
  }

  TEST_CASE("matches the per-row dense oracle") {
    std::mt19937_64 rng(7);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    randomize(store, rng, 1.0);
    auto xl = random_tensor({1, 4, 3, 5}, rng), xr = random_tensor({1, 4, 3, 5}, rng);
    auto [fl, fr] = sfam(xl, xr);
    auto expect = ref::sfam(ref::Map(xl), ref::Map(xr), store, "s");
    CHECK(ref::max_diff(expect.left, fl) <= 1e-5);
    CHECK(ref::max_diff(expect.right, fr) <= 1e-5);
  }

  TEST_CASE("attention rows are stochastic in both scopes") {
    std::mt19937_64 rng(8);
    for (auto scope : {AttentionScope::epipolar_row, AttentionScope::global}) {
      ParamStore<double> store;
      SfamOptions opts;
      opts.scope = scope;
      SelectiveFusionAttention<double> sfam(store, "s", 4, opts);
      randomize(store, rng, 2.0);
      auto xl = random_tensor({2, 4, 3, 5}, rng, -3, 3), xr = random_tensor({2, 4, 3, 5}, rng, -3, 3);
      AttentionTrace<double> trace;
      sfam(xl, xr, &trace);
      for (const auto* m : {&trace.into_left, &trace.into_right}) {
        const std::size_t cols = m->dim(2);
        CHECK(cols == (scope == AttentionScope::global ? 15u : 5u));
        for (std::size_t r = 0; r < m->numel() / cols; ++r) {
          double s = 0;
          for (std::size_t j = 0; j < cols; ++j) {
            CHECK(m->data()[r * cols + j] >= 0.0);
            s += m->data()[r * cols + j];
          }
          CHECK(std::abs(s - 1.0) <= 1e-6);
        }
      }
    }
  }

  TEST_CASE("epipolar locality") {
    std::mt19937_64 rng(9);
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    randomize(store, rng);
    auto xl = random_tensor({1, 4, 5, 6}, rng), xr = random_tensor({1, 4, 5, 6}, rng);
    auto [ql, qr] = sfam.select(xl, xr);
    auto base = sfam.attend_fuse(xl, xr, ql, qr).first;
    const std::size_t row = 2;
    auto xr2 = xr.clone(), qr2 = qr.clone();
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t w = 0; w < 6; ++w) {
        xr2.mutable_data()[(c * 5 + row) * 6 + w] += 0.7;
        qr2.mutable_data()[(c * 5 + row) * 6 + w] -= 0.4;
      }
    auto moved = sfam.attend_fuse(xl, xr2, ql, qr2).first;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t h = 0; h < 5; ++h)
        for (std::size_t w = 0; w < 6; ++w) {
          const bool same = base.at(0, c, h, w) == moved.at(0, c, h, w);
          if (h == row) {
            CHECK_FALSE(same);
          } else {
            CHECK(same);
          }
        }
  }

  TEST_CASE("epipolar locality of the whole module without selection") {
    std::mt19937_64 rng(10);
    ParamStore<double> store;
    SfamOptions opts;
    opts.selection = false;
    SelectiveFusionAttention<double> sfam(store, "s", 4, opts);
    randomize(store, rng);
    auto xl = random_tensor({1, 4, 4, 5}, rng), xr = random_tensor({1, 4, 4, 5}, rng);
    auto base = sfam(xl, xr).first;
    auto xr2 = xr.clone();
    for (std::size_t c = 0; c < 4; ++c) xr2.mutable_data()[(c * 4 + 1) * 5 + 3] += 0.5;
    auto moved = sfam(xl, xr2).first;
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t h = 0; h < 4; ++h)
        for (std::size_t w = 0; w < 5; ++w)
          if (h != 1) CHECK(base.at(0, c, h, w) == moved.at(0, c, h, w));
  }

  TEST_CASE("literal variant routes values to the other view") {
    std::mt19937_64 rng(11);
    ParamStore<double> store;
    SfamOptions opts;
    opts.variant = SfamVariant::literal;
    SelectiveFusionAttention<double> sfam(store, "s", 4, opts);
    randomize(store, rng);
    auto xl = random_tensor({1, 4, 3, 5}, rng), xr = random_tensor({1, 4, 3, 5}, rng);
    auto [ql, qr] = sfam.select(xl, xr);
    auto [fl, fr] = sfam.attend_fuse(xl, xr, ql, qr);
    auto value_left = conv2d(xl, store.at("s.value_left.weight"), store.at("s.value_left.bias"));
    auto to_right = cross_attention(ql, qr, value_left, AttentionScope::epipolar_row);
    CHECK(bitwise_equal(fr, add(xr, mul_channels(to_right, store.at("s.lambda_right")))));
  }

  TEST_CASE("view shape mismatch") {
    ParamStore<double> store;
    SelectiveFusionAttention<double> sfam(store, "s", 4, {});
    CHECK_THROWS_AS(sfam(TensorD({1, 4, 3, 5}), TensorD({1, 4, 3, 6})), ConfigError);
  }

  TEST_CASE("gradient check of selection, attention and fusion") {
    std::mt19937_64 rng(12);
    for (bool selection : {true, false}) {
      ParamStore<double> store;
      SfamOptions opts;
      opts.selection = selection;
      SelectiveFusionAttention<double> sfam(store, "s", 2, opts);
      randomize(store, rng);
      auto xl = random_tensor({1, 2, 4, 6}, rng), xr = random_tensor({1, 2, 4, 6}, rng);
      auto wl = random_tensor({1, 2, 4, 6}, rng), wr = random_tensor({1, 2, 4, 6}, rng);
      expect_grad_ok(store, {xl, xr}, [&] {
        auto [ql, qr] = sfam.select(xl, xr);
        auto [fl, fr] = sfam.attend_fuse(xl, xr, ql, qr);
        return add(weighted_sum(fl, wl), weighted_sum(fr, wr));
      });
    }
  }
}

TEST_SUITE("fourier convolution block") {
  TEST_CASE("zero parameters and pass-through fusion") {
    std::mt19937_64 rng(1);
    ParamStore<double> store;
    FourierConvBlock<double> block(store, "f", 4);
    zero_all(store);
    auto x = random_tensor({1, 4, 5, 6}, rng);
    const auto y = block(x);
    for (double v : y.data()) CHECK(v == 0.0);
    CHECK(bitwise_equal(block.local_branch(x), x));
    auto fuse = store.at("f.fuse.weight");
    for (std::size_t c = 0; c < 4; ++c) fuse.mutable_data()[c * 8 + c] = 1.0;
    CHECK(bitwise_equal(block(x), x));
  }

  TEST_CASE("odd extents keep the shape") {
    std::mt19937_64 rng(2);
    ParamStore<float> store;
    FourierConvBlock<float> block(store, "f", 64);
    store.initialize(1);
    auto x = random_tensor<float>({1, 64, 17, 23}, rng);
    CHECK(block(x).shape() == x.shape());
  }

  TEST_CASE("matches the dense-DFT reference") {
    std::mt19937_64 rng(3);
    ParamStore<double> store;
    FourierConvBlock<double> block(store, "f", 2);
    randomize(store, rng);
    auto x = random_tensor({1, 2, 8, 8}, rng);
    CHECK(ref::max_diff(ref::ffcb(ref::Map(x), store, "f"), block(x)) <= 1e-4);
    auto odd = random_tensor({1, 2, 5, 7}, rng);
    CHECK(ref::max_diff(ref::ffcb(ref::Map(odd), store, "f"), block(odd)) <= 1e-4);
  }

  TEST_CASE("zero-sized maps") {
    ParamStore<double> store;
    FourierConvBlock<double> block(store, "f", 2);
    CHECK_THROWS_AS(block(TensorD({1, 2, 0, 4})), DimensionError);
  }

  TEST_CASE("gradient check") {
    std::mt19937_64 rng(4);
    ParamStore<double> store;
    FourierConvBlock<double> block(store, "f", 2);
    randomize(store, rng);
    auto x = random_tensor({1, 2, 4, 6}, rng);
    auto w = random_tensor({1, 2, 4, 6}, rng);
    expect_grad_ok(store, {x}, [&] { return weighted_sum(block(x), w); });
  }
}

TEST_SUITE("upsampler") {
  TEST_CASE("shape law and zero parameters") {
    ParamStore<float> store;
    Upsampler<float> up(store, "head", 48, 2);
    std::mt19937_64 rng(1);
    auto x = random_tensor<float>({1, 48, 30, 90}, rng);
    auto y = up(x);
    CHECK(y.shape() == Shape{1, 3, 60, 180});
    for (float v : y.data()) CHECK(v == 0.0f);
    CHECK_THROWS_AS(Upsampler<float>(store, "bad", 48, 3), ConfigError);
  }

  TEST_CASE("shuffle preserves the multiset of conv outputs") {
    std::mt19937_64 rng(2);
    ParamStore<double> store;
    Upsampler<double> up(store, "head", 4, 4);
    store.initialize(5);
    auto x = random_tensor({1, 4, 3, 5}, rng);
    auto pre = conv2d(x, store.at("head.weight"), store.at("head.bias"), {1, 1, 1});
    std::vector<double> a(pre.data().begin(), pre.data().end());
    auto y = up(x);
    std::vector<double> b(y.data().begin(), y.data().end());
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);
  }

  TEST_CASE("gradient check") {
    std::mt19937_64 rng(3);
    for (std::size_t s : {2, 4}) {
      ParamStore<double> store;
      Upsampler<double> up(store, "head", 2, s);
      randomize(store, rng);
      auto x = random_tensor({1, 2, 4, 6}, rng);
      auto w = random_tensor({1, 3, 4 * s, 6 * s}, rng);
      expect_grad_ok(store, {x}, [&] { return weighted_sum(up(x), w); });
    }
  }
}
