#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "vesselnet/nn/blocks.hpp"

namespace vesselnet::testing {

namespace {

using nn::ConvSpec;
using nn::Mode;

std::string str(const Shape& s) { return nn::shape_string(s); }

std::vector<double> probe_for(const Shape& s, Rng& rng) {
  std::vector<double> p(nn::shape_volume(s));
  for (auto& v : p) v = rng.uniform(-1.0, 1.0);
  return p;
}

// Random BN parameters with non-trivial running statistics.
nn::BatchNormParams<double> random_bn(std::size_t c, Rng& rng) {
  auto bn = nn::BatchNormParams<double>::make(c);
  for (auto& v : bn.gamma.data()) v = rng.uniform(0.5, 1.5);
  for (auto& v : bn.beta.data()) v = rng.uniform(-0.5, 0.5);
  for (auto& v : bn.running_mean.data()) v = rng.uniform(-0.2, 0.2);
  for (auto& v : bn.running_var.data()) v = rng.uniform(0.5, 2.0);
  return bn;
}

void randomize_bn(nn::BatchNormParams<double>& bn, Rng& rng) {
  auto fresh = random_bn(bn.channels(), rng);
  std::copy(fresh.gamma.data().begin(), fresh.gamma.data().end(), bn.gamma.data().begin());
  std::copy(fresh.beta.data().begin(), fresh.beta.data().end(), bn.beta.data().begin());
  std::copy(fresh.running_mean.data().begin(), fresh.running_mean.data().end(), bn.running_mean.data().begin());
  std::copy(fresh.running_var.data().begin(), fresh.running_var.data().end(), bn.running_var.data().begin());
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<GradCheckResult> out;

  // conv_nd: 2D and 3D, strides, padding, grouped and depthwise.
  struct ConvCase {
    Shape input;
    ConvSpec spec;
  };
  std::vector<ConvCase> conv_cases = {
      {{2, 2, 5, 6}, ConvSpec::cube(2, 2, 3, 3, 1)},
      {{1, 3, 7, 5}, ConvSpec::cube(2, 3, 2, 3, 2, 1)},
      {{2, 1, 4, 4}, ConvSpec::cube(2, 1, 2, 2, 1, 0)},
      {{1, 4, 5, 5}, ConvSpec::cube(2, 4, 4, 3, 1, 1, 4)},
      {{1, 4, 4, 6}, ConvSpec::cube(2, 4, 2, 3, 1, 1, 2)},
      {{1, 2, 4, 3, 5}, ConvSpec::cube(3, 2, 2, 3, 1)},
      {{2, 3, 5, 4, 4}, ConvSpec::cube(3, 3, 3, 3, 2, 1, 3)},
      {{1, 2, 3, 3, 3}, ConvSpec::cube(3, 2, 4, 1, 1, 0)},
  };
  for (const auto& c : conv_cases) {
    auto x = random_tensor(c.input, rng);
    auto w = random_tensor(c.spec.weight_shape(), rng);
    auto b = random_tensor({c.spec.out_channels}, rng);
    const Shape out_shape = nn::conv_nd(x.detach(), c.spec, w.detach(), b.detach()).shape();
    auto probe = probe_for(out_shape, rng);
    out.push_back(grad_check("conv_nd " + str(c.input) + " groups=" + std::to_string(c.spec.groups), {x, w, b},
                             [&] { return probe_sum(nn::conv_nd(x, c.spec, w, b), probe); }));
  }

  // batch_norm in both modes.
  const std::vector<Shape> bn_shapes = {{4, 3}, {2, 2, 3, 3}, {3, 1, 4}, {2, 3, 2, 2, 2}, {1, 2, 5, 4}};
  for (const auto& s : bn_shapes) {
    for (Mode mode : {Mode::Train, Mode::Eval}) {
      auto x = random_tensor(s, rng, -2.0, 2.0);
      auto bn = random_bn(s[1], rng);
      auto probe = probe_for(s, rng);
      out.push_back(grad_check(std::string("batch_norm ") + (mode == Mode::Train ? "train " : "eval ") + str(s),
                               {x, bn.gamma, bn.beta},
                               [&] { return probe_sum(nn::batch_norm(x, bn, mode), probe); }));
    }
  }

  // activations
  const std::vector<Shape> act_shapes = {{7}, {2, 3}, {2, 2, 3}, {1, 3, 2, 2}, {2, 1, 2, 2, 2}};
  for (auto kind : {nn::ActivationKind::SiLU, nn::ActivationKind::ReLU, nn::ActivationKind::Sigmoid}) {
    const char* name = kind == nn::ActivationKind::SiLU ? "silu" : kind == nn::ActivationKind::ReLU ? "relu" : "sigmoid";
    for (const auto& s : act_shapes) {
      auto x = random_tensor(s, rng, -3.0, 3.0);
      auto probe = probe_for(s, rng);
      out.push_back(grad_check(std::string(name) + " " + str(s), {x},
                               [&] { return probe_sum(nn::activation(kind, x), probe); }));
    }
  }

  // global pooling
  const std::vector<Shape> pool_shapes = {{1, 1, 4}, {2, 3, 3, 3}, {2, 2, 2, 3, 2}, {1, 4, 5}, {3, 2, 2, 2}};
  for (auto kind : {nn::PoolKind::Max, nn::PoolKind::Avg}) {
    for (const auto& s : pool_shapes) {
      auto x = random_tensor(s, rng);
      auto probe = probe_for({s[0], s[1]}, rng);
      out.push_back(grad_check(std::string(kind == nn::PoolKind::Max ? "global_max_pool " : "global_avg_pool ") + str(s),
                               {x}, [&] { return probe_sum(nn::global_pool(kind, x), probe); }));
    }
  }

  // dense
  const std::vector<std::array<std::size_t, 3>> dense_dims = {{1, 2, 2}, {3, 4, 2}, {2, 5, 3}, {4, 1, 6}, {2, 6, 6}};
  for (auto [b, f, g] : dense_dims) {
    auto x = random_tensor({b, f}, rng);
    auto w = random_tensor({f, g}, rng);
    auto bias = random_tensor({g}, rng);
    auto probe = probe_for({b, g}, rng);
    out.push_back(grad_check("dense " + str({b, f}) + "x" + str({f, g}), {x, w, bias},
                             [&] { return probe_sum(nn::dense(x, w, bias), probe); }));
  }

  // softmax cross-entropy (loss is already scalar)
  const std::vector<std::size_t> ce_batches = {1, 2, 3, 5, 8};
  for (auto b : ce_batches) {
    auto z = random_tensor({b, 2}, rng, -3.0, 3.0);
    std::vector<int> labels(b);
    for (auto& l : labels) l = static_cast<int>(rng.below(2));
    out.push_back(grad_check("softmax_cross_entropy " + str({b, 2}), {z},
                             [&] { return nn::softmax_cross_entropy(z, labels).loss; }));
  }

  // channel scaling
  const std::vector<Shape> sc_shapes = {{1, 2, 3}, {2, 3, 2, 2}, {2, 1, 2, 2, 2}, {3, 2, 4}, {1, 4, 2, 3}};
  for (const auto& s : sc_shapes) {
    auto x = random_tensor(s, rng);
    auto gate = random_tensor({s[0], s[1]}, rng);
    auto probe = probe_for(s, rng);
    out.push_back(grad_check("scale_channels " + str(s), {x, gate},
                             [&] { return probe_sum(nn::scale_channels(x, gate), probe); }));
  }

  // add, mean_of, concat, slice, avg pool
  const std::vector<Shape> shapes = {{2, 2, 3}, {1, 3, 2, 2}, {2, 2, 2, 2, 2}, {1, 4, 3, 3}, {3, 1, 5}};
  for (const auto& s : shapes) {
    auto a = random_tensor(s, rng);
    auto b = random_tensor(s, rng);
    auto c = random_tensor(s, rng);
    auto probe = probe_for(s, rng);
    out.push_back(grad_check("add " + str(s), {a, b}, [&] { return probe_sum(nn::add(a, b), probe); }));
    out.push_back(grad_check("mean_of " + str(s), {a, b, c},
                             [&] { return probe_sum(nn::mean_of<double>({a, b, c}), probe); }));
    Shape cat = s;
    cat[1] *= 2;
    auto probe_cat = probe_for(cat, rng);
    out.push_back(grad_check("concat_channels " + str(s), {a, b},
                             [&] { return probe_sum(nn::concat_channels<double>({a, b}), probe_cat); }));
    Shape sl = s;
    sl[1] = 1;
    auto probe_sl = probe_for(sl, rng);
    out.push_back(grad_check("slice_channels " + str(s), {a},
                             [&] { return probe_sum(nn::slice_channels(a, s[1] - 1, 1), probe_sl); }));
  }
  const std::vector<Shape> pool2 = {{1, 1, 4, 4}, {2, 2, 3, 5}, {1, 2, 3, 3, 3}, {1, 1, 2, 6}, {2, 1, 2, 3, 4}};
  for (const auto& s : pool2) {
    auto x = random_tensor(s, rng);
    auto probe = probe_for(s, rng);
    out.push_back(grad_check("avg_pool_same " + str(s), {x},
                             [&] { return probe_sum(nn::avg_pool_same(x, 3), probe); }));
  }

  // dropout / drop_sample with a mask frozen by reseeding per evaluation
  const std::vector<Shape> drop_shapes = {{4, 3}, {2, 2, 3}, {3, 1, 2, 2}, {6, 2}, {2, 2, 2, 2, 2}};
  for (const auto& s : drop_shapes) {
    auto x = random_tensor(s, rng);
    auto probe = probe_for(s, rng);
    const std::uint64_t mask_seed = rng.next();
    out.push_back(grad_check("dropout " + str(s), {x}, [&] {
      Rng r(mask_seed);
      return probe_sum(nn::dropout(x, 0.2, Mode::Train, r), probe);
    }));
    out.push_back(grad_check("drop_sample " + str(s), {x}, [&] {
      Rng r(mask_seed);
      return probe_sum(nn::drop_sample(x, 0.5, Mode::Train, r), probe);
    }));
  }

  // squeeze-excitation
  const std::vector<std::pair<Shape, std::size_t>> se_cases = {
      {{1, 4, 3, 3}, 1}, {{2, 4, 2, 3}, 2}, {{1, 6, 2, 2, 2}, 3}, {{2, 3, 4}, 1}, {{1, 8, 2, 2}, 2}};
  for (const auto& [s, r] : se_cases) {
    auto x = random_tensor(s, rng);
    auto p = nn::SqueezeExcitationParams<double>::make(s[1], r, rng);
    for (auto* t : {&p.reduce_bias, &p.expand_bias}) {
      for (auto& v : t->data()) v = rng.uniform(-0.5, 0.5);
    }
    auto probe = probe_for(s, rng);
    out.push_back(grad_check("squeeze_excitation " + str(s), {x, p.reduce_weight, p.reduce_bias, p.expand_weight, p.expand_bias},
                             [&] { return probe_sum(nn::squeeze_excitation(x, p), probe); }));
  }

  // MBConv, both skip and projection variants, 2D and 3D, both modes.
  struct MbCase {
    Shape input;
    nn::MBConvSpec spec;
    Mode mode;
  };
  std::vector<MbCase> mb_cases = {
      {{2, 4, 4, 4}, nn::MBConvSpec::cube(2, 4, 4, 1, 3, 1), Mode::Train},
      {{2, 2, 5, 5}, nn::MBConvSpec::cube(2, 2, 3, 6, 3, 2), Mode::Train},
      {{1, 2, 3, 4, 3}, nn::MBConvSpec::cube(3, 2, 2, 6, 3, 1), Mode::Eval},
      {{2, 3, 3, 3, 3}, nn::MBConvSpec::cube(3, 3, 4, 1, 3, 1), Mode::Train},
      {{2, 2, 4, 4, 2}, nn::MBConvSpec::cube(3, 2, 2, 6, 3, 1), Mode::Train},
  };
  for (auto& c : mb_cases) {
    auto x = random_tensor(c.input, rng);
    auto params = nn::MBConvParams<double>::make(c.spec, rng);
    for (auto* bn : {&params.expand_bn, &params.depthwise_bn, &params.project_bn}) {
      if (bn->gamma.defined()) randomize_bn(*bn, rng);
    }
    nn::ParameterSet<double> set;
    params.register_into(set, "mb");
    std::vector<TensorD> inputs{x};
    for (const auto& e : set.entries()) {
      if (e.trainable) inputs.push_back(e.tensor);
    }
    const std::uint64_t mask_seed = rng.next();
    Shape out_shape;
    {
      nn::NoGradGuard guard;
      Rng r(mask_seed);
      out_shape = nn::mbconv(x, c.spec, params, Mode::Eval, r).shape();
    }
    auto probe = probe_for(out_shape, rng);
    out.push_back(grad_check(std::string("mbconv ") + (c.mode == Mode::Train ? "train " : "eval ") + str(c.input) +
                                 (c.spec.has_skip() ? " skip" : " proj"),
                             inputs, [&] {
                               Rng r(mask_seed);
                               return probe_sum(nn::mbconv(x, c.spec, params, c.mode, r), probe);
                             }));
  }
  return out;
}

}  // namespace vesselnet::testing
