#include <doctest.h>

#include <cmath>
#include <cstring>

#include "support/gradcheck.hpp"
#include "vesselnet/models.hpp"

using namespace vesselnet;
using namespace vesselnet::models;
using nn::Mode;
using nn::Shape;
using nn::Tensor;

namespace {

Tensor<float> random_input(const Shape& shape, std::uint64_t seed, double density = 0.2) {
  Rng rng(seed);
  Tensor<float> t(shape);
  for (auto& v : t.data()) v = rng.bernoulli(density) ? 1.0f : 0.0f;
  return t;
}

Shape batched(const Classifier& m, std::size_t batch) {
  Shape s{batch};
  for (auto d : m.sample_shape()) s.push_back(d);
  return s;
}

// Per-layer parameter formulas, written independently of the builder.
std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k, std::size_t groups = 1) {
  return out * (in / groups) * k * k * k;
}
std::size_t bn_params(std::size_t c) { return 2 * c; }
std::size_t dense_params(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t count_3d(const Model3DSpec& s) {
  std::size_t total = conv_params(1, s.stem_channels, s.stem_kernel) + bn_params(s.stem_channels);
  std::size_t in = s.stem_channels;
  for (const auto& st : s.stages) {
    for (std::size_t r = 0; r < st.repeats; ++r) {
      const std::size_t mid = in * st.expansion;
      if (st.expansion != 1) total += conv_params(in, mid, 1) + bn_params(mid);
      total += conv_params(mid, mid, st.kernel, mid) + bn_params(mid);
      const std::size_t se = std::max<std::size_t>(1, in / s.se_reduction);
      total += dense_params(mid, se) + dense_params(se, mid);
      total += conv_params(mid, st.out_channels, 1) + bn_params(st.out_channels);
      in = st.out_channels;
    }
  }
  total += conv_params(in, s.head_channels, 1) + bn_params(s.head_channels);
  return total + dense_params(s.head_channels, s.classes);
}

Tensor<float> param(const Classifier& m, const std::string& name) {
  const auto* e = m.parameters().find(name);
  REQUIRE(e != nullptr);
  return e->tensor;
}

nn::BatchNormParams<float> bn_of(const Classifier& m, const std::string& prefix) {
  return {param(m, prefix + ".gamma"), param(m, prefix + ".beta"), param(m, prefix + ".running_mean"),
          param(m, prefix + ".running_var")};
}

// Single-view FEB pass rebuilt from the registry by name.
Tensor<float> single_view_logits(const Classifier& m, const Model2DSpec& s, const Tensor<float>& view) {
  auto conv_bn = [&](const Tensor<float>& x, const std::string& prefix, std::size_t in, std::size_t out,
                     std::size_t k) {
    auto bn = bn_of(m, prefix + ".bn");
    return nn::relu(
        nn::batch_norm(nn::conv_nd(x, nn::ConvSpec::cube(2, in, out, k), param(m, prefix + ".weight")), bn,
                       Mode::Eval));
  };
  Tensor<float> h = view;
  std::size_t in = 1;
  for (std::size_t i = 0; i < s.n; ++i) {
    h = conv_bn(h, "feb.conv." + std::to_string(i), in, s.conv_filters(i), 3);
    in = s.conv_filters(i);
  }
  const std::size_t w = in / 4;
  for (std::size_t j = 0; j < s.p; ++j) {
    const std::string b = "feb.inception." + std::to_string(j);
    auto y1 = conv_bn(h, b + ".b1", in, w, 1);
    auto y2 = conv_bn(conv_bn(h, b + ".b2a", in, w, 1), b + ".b2b", w, w, 3);
    auto y3 = conv_bn(conv_bn(conv_bn(h, b + ".b3a", in, w, 1), b + ".b3b", w, w, 3), b + ".b3c", w, w, 3);
    auto y4 = conv_bn(nn::avg_pool_same(h, 3), b + ".b4", in, w, 1);
    h = nn::concat_channels<float>({y1, y2, y3, y4});
  }
  h = nn::global_pool(nn::PoolKind::Max, h);
  for (std::size_t i = 0; i < s.m; ++i) {
    const std::string d = "dense." + std::to_string(i);
    h = nn::relu(nn::dense(h, param(m, d + ".weight"), param(m, d + ".bias")));
  }
  return nn::dense(h, param(m, "classifier.weight"), param(m, "classifier.bias"));
}

Model2DSpec small_2d(std::size_t m, std::size_t n, std::size_t p) {
  Model2DSpec s;
  s.m = m;
  s.n = n;
  s.p = p;
  s.rows = 8;
  s.cols = 12;
  return s;
}

}  // namespace

TEST_CASE("efficientnet3d shapes and parameters") {
  SUBCASE("reduced config parameter count") {
    const auto spec = Model3DSpec::reduced();
    auto model = build_model(spec, 1);
    CHECK(count_3d(spec) == 4142);
    CHECK(model->parameters().trainable_scalars() == 4142);
    Rng rng(0);
    auto logits = model->forward(random_input(batched(*model, 3), 2), Mode::Train, rng);
    CHECK(logits.shape() == Shape{3, 2});
  }
  SUBCASE("default B0 table at full input size") {
    const Model3DSpec spec;
    auto model = build_model(spec, 1);
    CHECK(model->parameters().trainable_scalars() == count_3d(spec));
    Rng rng(0);
    auto logits = model->forward(random_input(Shape{1, 1, 128, 64, 128}, 3, 0.01), Mode::Eval, rng);
    CHECK(logits.shape() == Shape{1, 2});
    for (float v : logits.data()) CHECK(std::isfinite(v));
  }
  SUBCASE("zero input in eval mode is finite") {
    auto model = build_model(Model3DSpec::reduced(), 4);
    Rng rng(0);
    auto logits = model->forward(Tensor<float>(batched(*model, 1)), Mode::Eval, rng);
    for (float v : logits.data()) CHECK(std::isfinite(v));
  }
  SUBCASE("input mismatch") {
    auto model = build_model(Model3DSpec::reduced(), 4);
    Rng rng(0);
    CHECK_THROWS_AS(model->forward(Tensor<float>(Shape{1, 1, 32, 16, 30}), Mode::Eval, rng), nn::ShapeError);
  }
  SUBCASE("invalid stage tables") {
    auto s = Model3DSpec::reduced();
    s.stages[0].expansion = 6;
    CHECK_THROWS_WITH_AS(build_model(s, 1), doctest::Contains("expansion = 1"), ConfigError);
    s = Model3DSpec::reduced();
    s.stages[1].expansion = 1;
    CHECK_THROWS_WITH_AS(build_model(s, 1), doctest::Contains("expansion = 6"), ConfigError);
    s = Model3DSpec::reduced();
    s.stages.clear();
    CHECK_THROWS_AS(build_model(s, 1), ConfigError);
  }
}

TEST_CASE("cnn2d shapes") {
  SUBCASE("m=1 n=4 p=6 at 200x400") {
    Model2DSpec spec;
    auto model = build_model(spec, 1);
    Rng rng(0);
    auto logits = model->forward(random_input(Shape{1, 3, 200, 400}, 5, 0.05), Mode::Eval, rng);
    CHECK(logits.shape() == Shape{1, 2});
  }
  SUBCASE("sampled hyperparameter grid") {
    Rng pick(6);
    for (int t = 0; t < 12; ++t) {
      const auto spec = small_2d(1 + pick.below(10), 1 + pick.below(10), 1 + pick.below(10));
      auto model = build_model(spec, t);
      Rng rng(0);
      auto logits = model->forward(random_input(batched(*model, 2), t), Mode::Train, rng);
      CHECK(logits.shape() == Shape{2, 2});
      CHECK(model->parameters().find("dense." + std::to_string(spec.m - 1) + ".weight")->tensor.dim(1) ==
            6 * spec.m);
    }
  }
  SUBCASE("n conv layers before the inception blocks") {
    auto model = build_model(Model2DSpec{}, 1);
    std::size_t convs = 0, blocks = 0;
    for (const auto& e : model->parameters().entries()) {
      if (e.name.rfind("feb.conv.", 0) == 0 && e.name.ends_with(".weight")) ++convs;
      if (e.name.rfind("feb.inception.", 0) == 0 && e.name.ends_with(".b1.weight")) ++blocks;
    }
    CHECK(convs == 4);
    CHECK(blocks == 6);
    CHECK(model->parameters().find("feb.conv.3.weight")->tensor.dim(0) == 20);
  }
  SUBCASE("indexed filter mode") {
    auto s = small_2d(1, 3, 1);
    s.filters = FilterMode::Indexed;
    auto model = build_model(s, 1);
    CHECK(model->parameters().find("feb.conv.0.weight")->tensor.dim(0) == 8);
    CHECK(model->parameters().find("feb.conv.2.weight")->tensor.dim(0) == 16);
  }
  SUBCASE("unshared extractors") {
    auto s = small_2d(1, 1, 1);
    s.feb_shared = false;
    auto model = build_model(s, 1);
    CHECK(model->parameters().find("feb.sagittal.conv.0.weight") != nullptr);
    CHECK(model->parameters().find("feb.conv.0.weight") == nullptr);
  }
  SUBCASE("wrong view count") {
    auto model = build_model(small_2d(1, 1, 1), 1);
    Rng rng(0);
    CHECK_THROWS_WITH_AS(model->forward(Tensor<float>(Shape{1, 2, 8, 12}), Mode::Eval, rng),
                         doctest::Contains("exactly 3 view"), nn::ShapeError);
  }
  SUBCASE("range checks") {
    for (auto [m, n, p] : {std::tuple{0, 1, 1}, {11, 1, 1}, {1, 0, 1}, {1, 1, 11}}) {
      CHECK_THROWS_AS(build_model(small_2d(m, n, p), 1), ConfigError);
    }
    CHECK_THROWS_WITH(build_model(small_2d(0, 4, 6), 1), doctest::Contains("model.m = 0"));
  }
}

TEST_CASE("cnn2d view symmetry") {
  const auto spec = small_2d(2, 2, 2);
  auto model = build_model(spec, 9);
  Rng warm(1);
  // Move the running statistics away from their initial values first.
  for (int i = 0; i < 3; ++i) model->forward(random_input(batched(*model, 4), 40 + i), Mode::Train, warm);
  auto x = random_input(batched(*model, 2), 11, 0.3);
  Rng rng(0);
  const auto base = model->forward(x, Mode::Eval, rng);
  const std::size_t hw = spec.rows * spec.cols;
  const std::size_t perms[5][3] = {{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  for (const auto& perm : perms) {
    Tensor<float> y(x.shape());
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t v = 0; v < 3; ++v)
        std::memcpy(y.data().data() + (b * 3 + v) * hw, x.data().data() + (b * 3 + perm[v]) * hw,
                    hw * sizeof(float));
    const auto out = model->forward(y, Mode::Eval, rng);
    CHECK(std::memcmp(out.data().data(), base.data().data(), base.size() * sizeof(float)) == 0);
  }

  SUBCASE("replicated view equals the single-view pass") {
    Tensor<float> one(Shape{1, 1, spec.rows, spec.cols});
    std::memcpy(one.data().data(), x.data().data(), hw * sizeof(float));
    Tensor<float> rep(Shape{1, 3, spec.rows, spec.cols});
    for (std::size_t v = 0; v < 3; ++v) std::memcpy(rep.data().data() + v * hw, one.data().data(), hw * sizeof(float));
    const auto a = model->forward(rep, Mode::Eval, rng);
    const auto b = single_view_logits(*model, spec, one);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == doctest::Approx(b.data()[i]).epsilon(1e-5));
  }
}

TEST_CASE("build determinism and eval purity") {
  for (const ModelSpec& spec : {ModelSpec(Model3DSpec::reduced()), ModelSpec(small_2d(1, 2, 1))}) {
    auto a = build_model(spec, 77);
    auto b = build_model(spec, 77);
    auto c = build_model(spec, 78);
    REQUIRE(a->parameters().size() == b->parameters().size());
    bool differs = false;
    for (std::size_t i = 0; i < a->parameters().size(); ++i) {
      const auto& ea = a->parameters().entries()[i];
      const auto& eb = b->parameters().entries()[i];
      CHECK(ea.name == eb.name);
      CHECK(std::memcmp(ea.tensor.data().data(), eb.tensor.data().data(), ea.tensor.size() * sizeof(float)) == 0);
      const auto& ec = c->parameters().entries()[i];
      differs = differs || std::memcmp(ea.tensor.data().data(), ec.tensor.data().data(),
                                       ea.tensor.size() * sizeof(float)) != 0;
    }
    CHECK(differs);
    auto x = random_input(batched(*a, 2), 3);
    Rng r1(1), r2(2);
    const auto y1 = a->forward(x, Mode::Eval, r1);
    const auto y2 = a->forward(x, Mode::Eval, r2);
    CHECK(std::memcmp(y1.data().data(), y2.data().data(), y1.size() * sizeof(float)) == 0);
  }
}

TEST_CASE("spec key/value round trip") {
  for (const ModelSpec& spec : {ModelSpec(Model3DSpec{}), ModelSpec(Model3DSpec::reduced()), ModelSpec(Model2DSpec{}),
                                ModelSpec(small_2d(3, 5, 7))}) {
    KeyValueFile kv;
    write_spec(spec, kv);
    kv.reject_unknown(spec_keys());
    auto back = read_spec(KeyValueFile::parse(kv.to_string()));
    CHECK(back == spec);
  }
  auto kv = KeyValueFile::parse("model.kind = cnn2d\nmodel.m = 12\n");
  CHECK_THROWS_AS(read_spec(kv), ConfigError);
  CHECK_THROWS_AS(read_spec(KeyValueFile::parse("model.kind = resnet\n")), ConfigError);
  CHECK_THROWS_AS(read_spec(KeyValueFile::parse("model.kind = efficientnet3d\nmodel.stage.1 = 8,1,3\n")),
                  ConfigError);
  CHECK_THROWS_AS(read_spec(KeyValueFile::parse("model.kind = efficientnet3d\nmodel.stage.1 = 8,1,3,1,1\n"
                                                "model.stage.3 = 8,1,3,1,6\n")),
                  ConfigError);
}
