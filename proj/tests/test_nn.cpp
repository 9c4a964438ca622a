#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "support/gradcheck.hpp"
#include "vesselnet/nn/blocks.hpp"
#include "vesselnet/nn/checkpoint.hpp"
#include "vesselnet/io.hpp"
#include "vesselnet/nn/ops.hpp"

using namespace vesselnet;
using namespace vesselnet::nn;
using vesselnet::testing::random_tensor;

namespace {

Tensor<double> vec(Shape s, std::vector<double> v) { return Tensor<double>(std::move(s), std::move(v)); }

}  // namespace

TEST_CASE("conv_nd examples") {
  SUBCASE("zero input gives zero output") {
    Rng rng(1);
    Tensor<float> x(Shape{1, 1, 4, 4, 4});
    auto spec = ConvSpec::cube(3, 1, 2, 3, 1);
    auto w = kaiming_uniform<float>(spec.weight_shape(), 27, rng);
    auto y = conv_nd(x, spec, w, Tensor<float>(Shape{2}));
    CHECK(y.shape() == Shape{1, 2, 4, 4, 4});
    for (float v : y.data()) CHECK(v == 0.0f);
  }
  SUBCASE("identity kernel") {
    Rng rng(2);
    auto x = random_tensor({2, 1, 3, 5}, rng, -1, 1, false);
    auto spec = ConvSpec::cube(2, 1, 1, 1, 1, 0);
    auto y = conv_nd(x, spec, vec({1, 1, 1, 1}, {1.0}), vec({1}, {0.0}));
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
    auto x3 = random_tensor({1, 1, 2, 3, 4}, rng, -1, 1, false);
    auto y3 = conv_nd(x3, ConvSpec::cube(3, 1, 1, 1, 1, 0), vec({1, 1, 1, 1, 1}, {1.0}));
    for (std::size_t i = 0; i < x3.size(); ++i) CHECK(y3.data()[i] == x3.data()[i]);
  }
  SUBCASE("hand cross-correlation") {
    auto x = vec({1, 1, 2, 2}, {1, 2, 3, 4});
    auto y = conv_nd(x, ConvSpec::cube(2, 1, 1, 2, 1, 0), vec({1, 1, 2, 2}, {1, 1, 1, 1}));
    CHECK(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.item() == 10.0);
    // no kernel flip: weights [[1,0],[0,0]] pick the top-left input
    auto z = conv_nd(x, ConvSpec::cube(2, 1, 1, 2, 1, 0), vec({1, 1, 2, 2}, {1, 0, 0, 0}));
    CHECK(z.item() == 1.0);
  }
  SUBCASE("output extent rule") {
    auto spec = ConvSpec::cube(3, 1, 1, 5, 2);
    const Shape in{128, 64, 128};
    CHECK(spec.output_spatial(in) == Shape{64, 32, 64});
    CHECK(ConvSpec::cube(2, 1, 1, 3, 2, 0).output_spatial(Shape{7, 8}) == Shape{3, 3});
  }
  SUBCASE("shape errors name the axis") {
    auto spec = ConvSpec::cube(2, 3, 2, 3, 1);
    Tensor<float> bad(Shape{1, 2, 5, 5});
    Tensor<float> w(spec.weight_shape());
    try {
      conv_nd(bad, spec, w);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("axis 1") != std::string::npos);
    }
    Tensor<float> x(Shape{1, 3, 5, 5});
    Tensor<float> w_bad(Shape{2, 3, 3, 2});
    try {
      conv_nd(x, spec, w_bad);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("weight axis 3") != std::string::npos);
    }
    Tensor<float> tiny(Shape{1, 3, 1, 5});
    CHECK_THROWS_AS(conv_nd(tiny, ConvSpec::cube(2, 3, 2, 3, 1, 0), w), ShapeError);
  }
}

TEST_CASE("conv_nd is linear in its input") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t groups = trial % 2 ? 2 : 1;
    auto spec = ConvSpec::cube(trial < 3 ? 2 : 3, 2, 4, 3, 1 + trial % 2, 1, groups);
    Shape in{2, 2, 5, 6};
    if (spec.rank == 3) in = {1, 2, 4, 5, 3};
    auto x = random_tensor(in, rng, -1, 1, false);
    auto y = random_tensor(in, rng, -1, 1, false);
    auto w = random_tensor(spec.weight_shape(), rng, -1, 1, false);
    const double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    Tensor<double> mix(in);
    for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = a * x.data()[i] + b * y.data()[i];
    auto lhs = conv_nd(mix, spec, w);
    auto cx = conv_nd(x, spec, w);
    auto cy = conv_nd(y, spec, w);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(std::abs(lhs.data()[i] - (a * cx.data()[i] + b * cy.data()[i])) <= 1e-6);
    }
  }
}

TEST_CASE("batch_norm examples") {
  SUBCASE("constant input normalizes to zero") {
    auto bn = BatchNormParams<double>::make(2);
    Tensor<double> x(Shape{3, 2, 4}, 5.0);
    auto y = batch_norm(x, bn, Mode::Train);
    for (double v : y.data()) CHECK(v == 0.0);
  }
  SUBCASE("two values") {
    auto bn = BatchNormParams<double>::make(1);
    auto y = batch_norm(vec({2, 1}, {1.0, 3.0}), bn, Mode::Train);
    const double e = 1.0 / std::sqrt(1.0 + 1e-5);
    CHECK(y.data()[0] == doctest::Approx(-e).epsilon(1e-14));
    CHECK(y.data()[1] == doctest::Approx(e).epsilon(1e-14));
    // running stats moved by momentum 0.1 toward mean 2, variance 1
    CHECK(bn.running_mean.data()[0] == doctest::Approx(0.2));
    CHECK(bn.running_var.data()[0] == doctest::Approx(1.0));
  }
  SUBCASE("gamma zero yields beta") {
    auto bn = BatchNormParams<double>::make(2);
    bn.gamma.data()[0] = bn.gamma.data()[1] = 0.0;
    bn.beta.data()[0] = 0.25;
    bn.beta.data()[1] = -1.5;
    Rng rng(4);
    auto x = random_tensor({3, 2, 2, 2}, rng, -1, 1, false);
    for (Mode m : {Mode::Train, Mode::Eval}) {
      auto y = batch_norm(x, bn, m);
      for (std::size_t n = 0; n < 3; ++n)
        for (std::size_t i = 0; i < 4; ++i) {
          CHECK(y.data()[(n * 2 + 0) * 4 + i] == 0.25);
          CHECK(y.data()[(n * 2 + 1) * 4 + i] == -1.5);
        }
    }
  }
  SUBCASE("single element per channel is rejected in train mode") {
    auto bn = BatchNormParams<float>::make(3);
    Tensor<float> x(Shape{1, 3});
    CHECK_THROWS_AS(batch_norm(x, bn, Mode::Train), ShapeError);
    CHECK_NOTHROW(batch_norm(x, bn, Mode::Eval));
  }
  SUBCASE("eval mode is a deterministic affine map") {
    Rng rng(5);
    auto bn = BatchNormParams<float>::make(2);
    bn.running_mean.data()[0] = 0.3f;
    bn.running_var.data()[1] = 2.7f;
    Tensor<float> x(Shape{2, 2, 3, 3});
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-3, 3));
    auto a = batch_norm(x, bn, Mode::Eval);
    auto b = batch_norm(x, bn, Mode::Eval);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
  }
  SUBCASE("channel mismatch") {
    auto bn = BatchNormParams<float>::make(3);
    CHECK_THROWS_AS(batch_norm(Tensor<float>(Shape{2, 2, 2}), bn, Mode::Eval), ShapeError);
  }
}

TEST_CASE("activations") {
  auto x = vec({4}, {0.0, 1.0, -2.0, 2.0});
  auto s = silu(x);
  CHECK(s.data()[0] == 0.0);
  CHECK(s.data()[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-15));
  CHECK(s.data()[1] == doctest::Approx(0.731059).epsilon(1e-6));
  auto r = relu(x);
  CHECK(r.data()[2] == 0.0);
  CHECK(r.data()[3] == 2.0);
  auto g = sigmoid(vec({2}, {0.0, -800.0}));
  CHECK(g.data()[0] == 0.5);
  CHECK(std::isfinite(g.data()[1]));
  auto big = silu(vec({2}, {-800.0, 800.0}));
  CHECK(std::isfinite(big.data()[0]));
  CHECK(big.data()[1] == 800.0);
}

TEST_CASE("squeeze_excitation") {
  Rng rng(6);
  auto x = random_tensor({2, 4, 2, 3, 2}, rng, -1, 1, false);
  auto p = SqueezeExcitationParams<double>::make(4, 2, rng);
  SUBCASE("zero weights gate at one half") {
    for (auto* t : {&p.reduce_weight, &p.reduce_bias, &p.expand_weight, &p.expand_bias}) {
      for (auto& v : t->data()) v = 0.0;
    }
    auto y = squeeze_excitation(x, p);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == 0.5 * x.data()[i]);
  }
  SUBCASE("shape preserved") { CHECK(squeeze_excitation(x, p).shape() == x.shape()); }
  SUBCASE("squeeze of a constant channel is that constant") {
    Tensor<double> c(Shape{1, 2, 3, 3}, 0.0);
    for (std::size_t i = 0; i < 9; ++i) {
      c.data()[i] = 0.75;
      c.data()[9 + i] = -2.0;
    }
    auto pooled = global_pool(PoolKind::Avg, c);
    CHECK(pooled.data()[0] == 0.75);
    CHECK(pooled.data()[1] == -2.0);
  }
}

TEST_CASE("mbconv structure") {
  Rng rng(7);
  SUBCASE("zero residual weights reduce to the skip path") {
    auto spec = MBConvSpec::cube(3, 4, 4, 6, 3, 1);
    auto params = MBConvParams<double>::make(spec, rng);
    for (auto* bn : {&params.expand_bn, &params.depthwise_bn, &params.project_bn}) {
      for (auto& v : bn->gamma.data()) v = 0.0;
    }
    for (auto& v : params.project_weight.data()) v = 0.0;
    auto x = random_tensor({2, 4, 3, 3, 3}, rng, -1, 1, false);
    auto y = mbconv(x, spec, params, Mode::Eval, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("expansion width") {
    auto spec = MBConvSpec::cube(3, 16, 24, 6, 3, 2);
    CHECK(spec.expanded_channels() == 96);
    CHECK(spec.expand_conv().out_channels == 96);
    auto params = MBConvParams<float>::make(spec, rng);
    CHECK(params.expand_weight.shape() == Shape{96, 16, 1, 1, 1});
    CHECK(params.depthwise_weight.shape() == Shape{96, 1, 3, 3, 3});
    CHECK(spec.se_channels() == 4);
  }
  SUBCASE("channel change drops the skip branch") {
    auto spec = MBConvSpec::cube(2, 3, 5, 1, 3, 1);
    CHECK_FALSE(spec.has_skip());
    CHECK_FALSE(MBConvSpec::cube(2, 4, 4, 6, 3, 2).has_skip());
    CHECK(MBConvSpec::cube(2, 4, 4, 6, 3, 1).has_skip());
    auto params = MBConvParams<double>::make(spec, rng);
    CHECK_FALSE(params.expand_weight.defined());
    auto x = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
    auto y = mbconv(x, spec, params, Mode::Train, rng);
    CHECK(y.shape() == Shape{2, 5, 4, 4});
  }
  SUBCASE("invalid expansion rejected") { CHECK_THROWS(MBConvSpec::cube(3, 4, 4, 3, 3, 1)); }
}

TEST_CASE("drop_sample") {
  Rng rng(8);
  auto x = random_tensor({6, 2, 3}, rng, -1, 1, false);
  SUBCASE("eval identity") {
    auto y = drop_sample(x, 0.5, Mode::Eval, rng);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }
  SUBCASE("train: survivors doubled, dropped zeroed") {
    auto y = drop_sample(x, 0.5, Mode::Train, rng);
    int survived = 0, dropped = 0;
    for (std::size_t n = 0; n < 6; ++n) {
      bool zero = true, doubled = true;
      for (std::size_t i = 0; i < 6; ++i) {
        zero = zero && y.data()[n * 6 + i] == 0.0;
        doubled = doubled && y.data()[n * 6 + i] == 2.0 * x.data()[n * 6 + i];
      }
      CHECK((zero || doubled));
      survived += doubled;
      dropped += zero;
    }
    CHECK(survived + dropped == 6);
  }
  SUBCASE("expectation preserved") {
    Tensor<double> s(Shape{1, 3}, 0.0);
    s.data()[0] = 1.0;
    s.data()[1] = -2.0;
    s.data()[2] = 0.5;
    std::vector<double> mean(3, 0.0);
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
      auto y = drop_sample(s, 0.5, Mode::Train, rng);
      for (int i = 0; i < 3; ++i) mean[i] += y.data()[i] / trials;
    }
    for (int i = 0; i < 3; ++i) CHECK(std::abs(mean[i] - s.data()[i]) <= 0.02 * std::abs(s.data()[i]));
  }
}

TEST_CASE("dropout") {
  Rng rng(9);
  auto x = random_tensor({4, 5}, rng, 0.5, 1, false);
  auto e = dropout(x, 0.2, Mode::Eval, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(e.data()[i] == x.data()[i]);
  auto z = dropout(x, 0.0, Mode::Train, rng);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(z.data()[i] == x.data()[i]);
  Tensor<float> ones(Shape{100000}, 1.0f);
  auto d = dropout(ones, 0.2, Mode::Train, rng);
  std::size_t zeros = 0;
  for (float v : d.data()) {
    if (v == 0.0f) ++zeros;
    else CHECK(v == doctest::Approx(1.25f));
  }
  // binomial sd is ~0.0013; 0.01 is more than seven sigma
  CHECK(std::abs(static_cast<double>(zeros) / 100000.0 - 0.2) <= 0.01);
  CHECK_THROWS(dropout(x, 1.0, Mode::Train, rng));
}

TEST_CASE("global_pool") {
  Tensor<double> c(Shape{2, 3, 2, 2}, 1.5);
  for (auto kind : {PoolKind::Max, PoolKind::Avg}) {
    auto y = global_pool(kind, c);
    CHECK(y.shape() == Shape{2, 3});
    for (double v : y.data()) CHECK(v == 1.5);
  }
  Tensor<double> hot(Shape{1, 1, 3, 3, 3}, 0.0);
  hot.data()[13] = 4.0;
  CHECK(global_pool(PoolKind::Max, hot).item() == 4.0);
  auto neg = vec({1, 1, 5}, {-3.0, -0.5, -7.0, -1.0, -2.0});
  CHECK(global_pool(PoolKind::Max, neg).item() == -0.5);
}

TEST_CASE("dense") {
  auto x = vec({1, 2}, {1.0, 2.0});
  auto id = dense(x, vec({2, 2}, {1, 0, 0, 1}), vec({2}, {0, 0}));
  CHECK(id.data()[0] == 1.0);
  CHECK(id.data()[1] == 2.0);
  auto zw = dense(x, vec({2, 2}, {0, 0, 0, 0}), vec({2}, {3, -4}));
  CHECK(zw.data()[0] == 3.0);
  CHECK(zw.data()[1] == -4.0);
  auto y = dense(x, vec({2, 2}, {1, 0, 0, 2}), vec({2}, {0, 1}));
  CHECK(y.data()[0] == 1.0);
  CHECK(y.data()[1] == 5.0);
  CHECK_THROWS_AS(dense(x, vec({3, 2}, {0, 0, 0, 0, 0, 0}), vec({2}, {0, 0})), ShapeError);
}

TEST_CASE("softmax_cross_entropy") {
  std::vector<int> labels{0, 1};
  auto eq = softmax_cross_entropy(vec({2, 2}, {0.3, 0.3, -1.0, -1.0}), labels);
  CHECK(eq.loss.item() == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double p : eq.probs) CHECK(p == 0.5);
  auto sat = softmax_cross_entropy(vec({1, 2}, {0.0, 50.0}), std::vector<int>{1});
  CHECK(sat.loss.item() < 1e-15);
  CHECK(sat.loss.item() >= 0.0);
  auto satf = softmax_cross_entropy(Tensor<float>(Shape{1, 2}, std::vector<float>{50.0f, 0.0f}), std::vector<int>{0});
  CHECK(satf.loss.item() < 1e-15f);
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    auto z = random_tensor({4, 2}, rng, -20, 20, false);
    std::vector<int> ys{0, 1, 1, 0};
    auto r = softmax_cross_entropy(z, ys);
    CHECK(r.loss.item() >= 0.0);
    for (int n = 0; n < 4; ++n) CHECK(std::abs(r.probs[2 * n] + r.probs[2 * n + 1] - 1.0) <= 1e-12);
  }
  CHECK_THROWS(softmax_cross_entropy(vec({1, 2}, {0, 0}), std::vector<int>{2}));
}

TEST_CASE("backward") {
  Rng rng(11);
  SUBCASE("unused parameter has exactly zero gradient") {
    auto x = random_tensor({2, 3}, rng, -1, 1, false);
    auto w = random_tensor({3, 2}, rng);
    auto b = random_tensor({2}, rng);
    auto unused = random_tensor({3, 2}, rng);
    ParameterSet<double> set;
    set.add("w", w);
    set.add("b", b);
    set.add("unused", unused);
    set.zero_grad();
    std::vector<int> ys{1, 0};
    backward(softmax_cross_entropy(dense(x, w, b), ys).loss);
    for (double g : unused.grad()) CHECK(g == 0.0);
    double total = 0.0;
    for (double g : w.grad()) total += std::abs(g);
    CHECK(total > 0.0);
  }
  SUBCASE("logit gradient is (probs - onehot) / B") {
    auto z = random_tensor({3, 2}, rng, -2, 2);
    std::vector<int> ys{1, 0, 1};
    z.zero_grad();
    auto r = softmax_cross_entropy(z, ys);
    backward(r.loss);
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t c = 0; c < 2; ++c) {
        const double expect = (r.probs[n * 2 + c] - (static_cast<int>(c) == ys[n] ? 1.0 : 0.0)) / 3.0;
        CHECK(z.grad()[n * 2 + c] == doctest::Approx(expect).epsilon(1e-14));
      }
    // and it agrees with the finite-difference oracle
    auto res = vesselnet::testing::grad_check("ce", {z}, [&] { return softmax_cross_entropy(z, ys).loss; });
    CHECK(res.max_rel_error <= 1e-8);
  }
  SUBCASE("tape visits each node once in topological order") {
    auto a = random_tensor({2, 2}, rng);
    auto s = add(a, a);
    auto t = add(s, s);
    std::vector<double> probe(4, 1.0);
    auto l = vesselnet::testing::probe_sum(t, probe);
    GradTape<double> tape(l);
    CHECK(tape.nodes().size() == 4);  // a, s, t, l
    CHECK(tape.nodes().back() == l.node().get());
    a.zero_grad();
    tape.backward();
    for (double g : a.grad()) CHECK(g == 4.0);
  }
  SUBCASE("cycle is reported") {
    auto a = random_tensor({1}, rng);
    auto b = add(a, a);
    auto c = add(b, b);
    b.node()->parents.push_back(c.node());  // only reachable by editing the graph by hand
    CHECK_THROWS_AS(GradTape<double>{c}, std::logic_error);
    b.node()->parents.pop_back();
  }
  SUBCASE("loss must be scalar") {
    auto a = random_tensor({2}, rng);
    CHECK_THROWS_AS(GradTape<double>{add(a, a)}, ShapeError);
  }
  SUBCASE("no-grad guard records nothing") {
    auto a = random_tensor({2}, rng);
    NoGradGuard guard;
    auto b = add(a, a);
    CHECK_FALSE(b.requires_grad());
    CHECK(b.node()->parents.empty());
  }
}

TEST_CASE("gradient suite: analytic vs central differences") {
  auto results = vesselnet::testing::run_gradient_suite(2024);
  CHECK(results.size() > 100);
  for (const auto& r : results) {
    INFO(r.label << " rel error " << r.max_rel_error);
    CHECK(r.passed(1e-5));
  }
}

TEST_CASE("seeded forward/backward is bit-reproducible") {
  auto run = [] {
    Rng rng(77);
    auto spec = MBConvSpec::cube(3, 4, 4, 6, 3, 1);
    auto params = MBConvParams<float>::make(spec, rng);
    ParameterSet<float> set;
    params.register_into(set, "b");
    Tensor<float> x(Shape{2, 4, 4, 4, 4});
    for (auto& v : x.data()) v = static_cast<float>(rng.uniform(-1, 1));
    set.zero_grad();
    auto y = mbconv(x, spec, params, Mode::Train, rng);
    auto logits = dense(global_pool(PoolKind::Avg, y), Tensor<float>(Shape{4, 2}, 0.1f), Tensor<float>(Shape{2}));
    std::vector<int> ys{0, 1};
    backward(softmax_cross_entropy(logits, ys).loss);
    std::vector<float> out(y.data().begin(), y.data().end());
    for (const auto& e : set.entries()) {
      if (e.trainable) out.insert(out.end(), e.tensor.grad().begin(), e.tensor.grad().end());
    }
    return out;
  };
  auto a = run();
  auto b = run();
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
}

TEST_CASE("checkpoint container") {
  Rng rng(12);
  ParameterSet<float> set;
  auto w = kaiming_uniform<float>({3, 2, 2}, 4, rng);
  auto bn = BatchNormParams<float>::make(3);
  bn.running_var.data()[1] = 0.125f;
  set.add("conv.weight", w);
  set.add_batch_norm("bn", bn);
  const auto dir = std::filesystem::temp_directory_path() / "vesselnet_ckpt_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "a.vnck").string();
  save_checkpoint(path, snapshot(set, {{"model", "unit"}, {"note", "two words"}}));
  auto loaded = load_checkpoint(path);
  REQUIRE(loaded.tensors.size() == 5);
  CHECK(*loaded.meta_value("note") == "two words");
  CHECK(loaded.tensors[0].shape == Shape{3, 2, 2});
  CHECK_FALSE(loaded.tensors[3].trainable);

  ParameterSet<float> other;
  auto w2 = Tensor<float>(Shape{3, 2, 2});
  auto bn2 = BatchNormParams<float>::make(3);
  other.add("conv.weight", w2);
  other.add_batch_norm("bn", bn2);
  restore(loaded, other);
  CHECK(std::equal(w.data().begin(), w.data().end(), w2.data().begin()));
  CHECK(bn2.running_var.data()[1] == 0.125f);

  // manifest is text followed by little-endian binary32
  const std::string raw = read_file(path);
  CHECK(raw.rfind("VNCK 1\n", 0) == 0);
  CHECK(raw.find("tensor conv.weight 1 3x2x2 0 48\n") != std::string::npos);
  CHECK(raw.size() == raw.find("end\n") + 4 + (12 + 4 * 3) * 4);

  ParameterSet<float> wrong;
  wrong.add("conv.weight", Tensor<float>(Shape{2, 2, 2}));
  CHECK_THROWS_AS(restore(loaded, wrong), FormatError);
  std::filesystem::remove_all(dir);
}
