// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "mssf/model/checkpoint.hpp"
#include "mssf/ops.hpp"
#include "support.hpp"

using namespace mssf;
using mssf::testing::bitwise_equal;
using mssf::testing::random_tensor;

namespace {

// Closed-form parameter arithmetic, written independently of the builders.
std::size_t conv_p(std::size_t cin, std::size_t cout, std::size_t k = 1, std::size_t groups = 1) {
  return cout * (cin / groups) * k * k + cout;
}
std::size_t widen(std::size_t c, double e) {
  const auto raw = static_cast<std::size_t>(std::ceil(e * static_cast<double>(c) - 1e-9));
  return std::max<std::size_t>(4, (raw + 3) / 4 * 4);
}
std::size_t msb_p(std::size_t c, double e, const std::vector<std::size_t>& ks) {
  const std::size_t h = widen(c, e), g = h / 2, nb = ks.size();
  std::size_t p = 2 * c + conv_p(c, h) + conv_p(h, h, 3, h) + conv_p(g, g) + conv_p(g, c) + 2 * c;
  for (auto k : ks) p += conv_p(c, h) + conv_p(h, h, k, h) + conv_p(nb * g, nb * g, k, nb * g);
  return p + conv_p(nb * nb * g / 2, c);
}
std::size_t sfam_p(std::size_t c, std::size_t r) {
  const std::size_t d = std::max<std::size_t>(2, ((c + r - 1) / r + 1) / 2 * 2);
  return 4 * c + conv_p(c, d) + 2 * conv_p(d / 2, c) + 2 * conv_p(c, c) + 2 * c;
}
std::size_t ffcb_p(std::size_t c, double e) {
  const std::size_t h = widen(c, e), g = h / 2;
  return conv_p(c, h) + 2 * h + conv_p(g, c) + conv_p(c, h) + 2 * h + conv_p(2 * g, 4 * g) + 8 * g + conv_p(g, c) +
         conv_p(2 * c, c);
}
std::size_t model_p(const ModelConfig& m) {
  return conv_p(3, m.channels, 3) + 2 * ffcb_p(m.channels, m.ffcb_expansion) +
         m.blocks * (msb_p(m.channels, m.msb.expansion, m.msb.kernels) + sfam_p(m.channels, m.sfam_reduction)) +
         conv_p(m.channels, 3 * m.scale * m.scale, 3);
}

template <typename T>
void zero_params(nn::ParamStore<T>& store) {
  for (const auto& e : store.entries()) {
    auto t = e.value;
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), T(0));
  }
}

std::string serialize(const Model<float>& m, std::uint64_t step = 0) {
  std::stringstream ss;
  save_checkpoint(ss, m, step);
  return ss.str();
}

}  // namespace

TEST_SUITE("parameter counts") {
  TEST_CASE("presets land near the published sizes and match closed-form arithmetic") {
    const std::pair<const char*, std::size_t> cases[] = {{"T", 2}, {"T", 4}, {"S", 2}, {"S", 4}};
    const double published[] = {0.57e6, 0.59e6, 1.80e6, 1.82e6};
    for (std::size_t i = 0; i < 4; ++i) {
      const auto cfg = ModelConfig::preset(cases[i].first, cases[i].second);
      Model<float> m(cfg);
      CHECK(m.count_params() == model_p(cfg));
      const double rel = std::abs(static_cast<double>(m.count_params()) - published[i]) / published[i];
      INFO(cases[i].first << " x" << cases[i].second << " count " << m.count_params());
      CHECK(rel <= 0.05);
    }
  }

  TEST_CASE("scale difference is exactly the head difference") {
    for (const char* p : {"T", "S", "desk"}) {
      Model<float> a(ModelConfig::preset(p, 2)), b(ModelConfig::preset(p, 4));
      const std::size_t c = a.config().channels;
      CHECK(b.count_params() - a.count_params() == 3 * (16 - 4) * (9 * c + 1));
    }
  }

  TEST_CASE("trunk blocks scale linearly in N") {
    auto cfg = ModelConfig::preset("desk");
    Model<float> a(cfg);
    cfg.blocks *= 2;
    Model<float> b(cfg);
    CHECK(b.trunk_block_params() == 2 * a.trunk_block_params());
  }

  TEST_CASE("ablation configurations change the count as expected") {
    auto cfg = ModelConfig::preset("desk");
    cfg.selection = false;
    CHECK(Model<float>(cfg).count_params() ==
          model_p(ModelConfig::preset("desk")) - cfg.blocks * (conv_p(16, 8) + 2 * conv_p(4, 16)));
    cfg = ModelConfig::preset("desk");
    cfg.ffcb_early = false;
    CHECK(Model<float>(cfg).count_params() == model_p(ModelConfig::preset("desk")) - ffcb_p(16, 2.0));
    for (std::size_t nb = 1; nb <= 4; ++nb) {
      cfg = ModelConfig::preset("desk");
      cfg.msb.kernels.clear();
      for (std::size_t b = 0; b < nb; ++b) cfg.msb.kernels.push_back(3 + 2 * b);
      CHECK(Model<float>(cfg).count_params() == model_p(cfg));
    }
  }
}

TEST_SUITE("model forward") {
  TEST_CASE("same seed gives bitwise identical parameters") {
    Model<float> a(ModelConfig::preset("desk")), b(ModelConfig::preset("desk"));
    a.initialize(42);
    b.initialize(42);
    CHECK(serialize(a) == serialize(b));
    b.initialize(43);
    CHECK(serialize(a) != serialize(b));
  }

  TEST_CASE("zero network returns the bilinear upsample") {
    Model<float> m(ModelConfig::preset("desk"));
    zero_params(m.params());
    std::mt19937_64 rng(1);
    auto l = random_tensor<float>({2, 3, 30, 90}, rng, 0, 1), r = random_tensor<float>({2, 3, 30, 90}, rng, 0, 1);
    auto out = m.forward(l, r);
    CHECK(out.left.shape() == Shape{2, 3, 60, 180});
    CHECK(bitwise_equal(out.left, bilinear_upsample(l, 2)));
    CHECK(bitwise_equal(out.right, bilinear_upsample(r, 2)));
  }

  TEST_CASE("eval mode ignores stochastic depth and the rng") {
    auto cfg = ModelConfig::preset("desk");
    Model<float> a(cfg);
    cfg.stochastic_depth_prob = 0.5;
    Model<float> b(cfg);
    a.initialize(3);
    b.initialize(3);
    std::mt19937_64 rng(2), r1(5), r2(99);
    auto l = random_tensor<float>({1, 3, 6, 10}, rng, 0, 1), r = random_tensor<float>({1, 3, 6, 10}, rng, 0, 1);
    auto oa = a.forward(l, r, false, &r1);
    auto ob = b.forward(l, r, false, &r2);
    CHECK(bitwise_equal(oa.left, ob.left));
    CHECK(bitwise_equal(oa.right, ob.right));
  }

  TEST_CASE("views swap when cross-view fusion is inactive") {
    Model<float> m(ModelConfig::preset("desk"));
    m.initialize(9);  // lambda starts at zero
    std::mt19937_64 rng(4);
    auto l = random_tensor<float>({1, 3, 6, 8}, rng, 0, 1), r = random_tensor<float>({1, 3, 6, 8}, rng, 0, 1);
    auto a = m.forward(l, r), b = m.forward(r, l);
    CHECK(bitwise_equal(a.left, b.right));
    CHECK(bitwise_equal(a.right, b.left));
  }

  TEST_CASE("skipping every stage makes the output independent of the stage parameters") {
    auto cfg = ModelConfig::preset("desk");
    cfg.stochastic_depth_prob = 1.0;
    Model<float> m(cfg);
    m.initialize(10);
    std::mt19937_64 rng(4), r1(1), r2(2);
    auto l = random_tensor<float>({1, 3, 5, 7}, rng, 0, 1), r = random_tensor<float>({1, 3, 5, 7}, rng, 0, 1);
    auto before = m.forward(l, r, true, &r1);
    for (const auto& e : m.params().entries())
      if (e.name.starts_with("trunk.")) {
        auto t = e.value;
        for (auto& v : t.mutable_data()) v = 3.0f;
      }
    auto after = m.forward(l, r, true, &r2);
    CHECK(bitwise_equal(before.left, after.left));
    CHECK(bitwise_equal(before.right, after.right));
  }

  TEST_CASE("training-mode dropping is reproducible from the rng seed") {
    auto cfg = ModelConfig::preset("desk");
    cfg.blocks = 4;
    cfg.stochastic_depth_prob = 0.5;
    Model<float> m(cfg);
    m.initialize(11);
    for (const auto& e : m.params().entries())
      if (e.name.find("lambda") != std::string::npos) {
        auto t = e.value;
        for (auto& v : t.mutable_data()) v = 0.3f;
      }
    std::mt19937_64 rng(4);
    auto l = random_tensor<float>({1, 3, 4, 6}, rng, 0, 1), r = random_tensor<float>({1, 3, 4, 6}, rng, 0, 1);
    std::mt19937_64 a(7), b(7);
    CHECK(bitwise_equal(m.forward(l, r, true, &a).left, m.forward(l, r, true, &b).left));
    CHECK_THROWS_AS(m.forward(l, r, true, nullptr), UsageError);
  }

  TEST_CASE("input validation") {
    Model<float> m(ModelConfig::preset("desk"));
    CHECK_THROWS_AS(m.forward(TensorF({1, 3, 4, 4}), TensorF({1, 3, 4, 5})), InputError);
    CHECK_THROWS_AS(m.forward(TensorF({1, 1, 4, 4}), TensorF({1, 1, 4, 4})), InputError);
    CHECK_THROWS_AS(ModelConfig::preset("XL"), ConfigError);
    auto cfg = ModelConfig::preset("desk");
    cfg.scale = 3;
    CHECK_THROWS_AS(Model<float>{cfg}, ConfigError);
  }
}

TEST_SUITE("configuration text") {
  TEST_CASE("round trip through key/value text") {
    auto cfg = ModelConfig::preset("S", 4);
    cfg.msb.kernels = {3, 5, 7};
    cfg.sfam_variant = nn::SfamVariant::literal;
    cfg.attention_scope = nn::AttentionScope::global;
    cfg.ffcb_final = false;
    KeyValues kv;
    cfg.write(kv);
    auto back = ModelConfig::read(KeyValues::parse(kv.to_text()));
    CHECK(back == cfg);
    CHECK(config_differences(cfg, ModelConfig::preset("S", 4)).size() == 4);
  }

  TEST_CASE("key resolution") {
    const std::vector<std::string> known{"train.total_iters", "model.channels", "model.scale", "data.scale"};
    CHECK(resolve_key("total_iters", known) == "train.total_iters");
    CHECK(resolve_key("model.scale", known) == "model.scale");
    CHECK_THROWS_AS(resolve_key("scale", known), ConfigError);
    CHECK_THROWS_AS(resolve_key("nonsense", known), ConfigError);
  }

  TEST_CASE("malformed values") {
    auto kv = KeyValues::parse("model.channels = twelve\n");
    CHECK_THROWS_AS(ModelConfig::read(kv), ConfigError);
    CHECK_THROWS_AS(KeyValues::parse("just words"), ConfigError);
    CHECK_THROWS_AS(ModelConfig::read(KeyValues::parse("model.width = 3")), ConfigError);
  }
}

TEST_SUITE("checkpoints") {
  TEST_CASE("save, load and forward reproduce the original bitwise") {
    Model<float> a(ModelConfig::preset("desk"));
    a.initialize(5);
    const auto bytes = serialize(a, 17);
    Model<float> b(ModelConfig::preset("desk"));
    std::stringstream in(bytes);
    auto info = load_checkpoint(in, b);
    CHECK(info.step == 17);
    CHECK_FALSE(info.optimizer.has_value());
    CHECK(serialize(b, 17) == bytes);
    std::mt19937_64 rng(1);
    auto l = random_tensor<float>({1, 3, 4, 6}, rng, 0, 1), r = random_tensor<float>({1, 3, 4, 6}, rng, 0, 1);
    CHECK(bitwise_equal(a.forward(l, r).left, b.forward(l, r).left));
  }

  TEST_CASE("optimizer state round trip") {
    Model<float> a(ModelConfig::preset("desk"));
    a.initialize(5);
    OptimizerState opt;
    opt.step = 9;
    std::mt19937_64 rng(3);
    for (const auto& e : a.params().entries()) {
      opt.first_moment.push_back(random_tensor<float>(e.value.shape(), rng));
      opt.second_moment.push_back(random_tensor<float>(e.value.shape(), rng, 0, 1));
    }
    std::stringstream ss;
    save_checkpoint(ss, a, 9, &opt);
    Model<float> b(ModelConfig::preset("desk"));
    auto info = load_checkpoint(ss, b);
    REQUIRE(info.optimizer.has_value());
    CHECK(info.optimizer->step == 9);
    for (std::size_t i = 0; i < opt.first_moment.size(); ++i) {
      CHECK(bitwise_equal(info.optimizer->first_moment[i], opt.first_moment[i]));
      CHECK(bitwise_equal(info.optimizer->second_moment[i], opt.second_moment[i]));
    }
  }

  TEST_CASE("corrupt, truncated and mismatched files") {
    Model<float> a(ModelConfig::preset("desk"));
    a.initialize(5);
    auto bytes = serialize(a);
    {
      auto bad = bytes;
      bad[0] = 'X';
      std::stringstream in(bad);
      CHECK_THROWS_AS(load_checkpoint(in, a), FormatError);
    }
    {
      std::stringstream in(bytes.substr(0, bytes.size() / 2));
      CHECK_THROWS_AS(load_checkpoint(in, a), FormatError);
    }
    {
      auto bad = bytes;
      const auto pos = bad.find("head.bias");
      REQUIRE(pos != std::string::npos);
      bad[pos] = 'x';
      std::stringstream in(bad);
      CHECK_THROWS_AS(load_checkpoint(in, a), FormatError);
    }
    {
      Model<float> t(ModelConfig::preset("T"));
      Model<float> s(ModelConfig::preset("S"));
      std::stringstream in(serialize(t));
      try {
        load_checkpoint(in, s);
        FAIL("expected a configuration error");
      } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("channels") != std::string::npos);
        CHECK(msg.find("blocks") != std::string::npos);
      }
    }
  }
}
