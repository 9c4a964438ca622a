#include "vesselnet/nn/blocks.hpp"

#include <algorithm>
#include <stdexcept>

namespace vesselnet::nn {

template <class T>
SqueezeExcitationParams<T> SqueezeExcitationParams<T>::make(std::size_t channels, std::size_t reduced,
                                                            Rng& rng) {
  if (reduced == 0) throw std::invalid_argument("squeeze_excitation: reduced width must be at least 1");
  SqueezeExcitationParams p;
  p.reduce_weight = kaiming_uniform<T>(Shape{channels, reduced}, channels, rng);
  p.reduce_bias = zeros_param<T>(Shape{reduced});
  p.expand_weight = kaiming_uniform<T>(Shape{reduced, channels}, reduced, rng);
  p.expand_bias = zeros_param<T>(Shape{channels});
  return p;
}

template <class T>
void SqueezeExcitationParams<T>::register_into(ParameterSet<T>& set, const std::string& prefix) const {
  set.add(prefix + ".reduce.weight", reduce_weight);
  set.add(prefix + ".reduce.bias", reduce_bias);
  set.add(prefix + ".expand.weight", expand_weight);
  set.add(prefix + ".expand.bias", expand_bias);
}

template <class T>
Tensor<T> squeeze_excitation(const Tensor<T>& x, const SqueezeExcitationParams<T>& p) {
  auto pooled = global_pool(PoolKind::Avg, x);
  auto hidden = silu(dense(pooled, p.reduce_weight, p.reduce_bias));
  auto gate = sigmoid(dense(hidden, p.expand_weight, p.expand_bias));
  return scale_channels(x, gate);
}

MBConvSpec MBConvSpec::cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                            std::size_t expansion, std::size_t kernel, std::size_t stride) {
  MBConvSpec s;
  s.rank = rank;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.expansion = expansion;
  s.kernel.assign(rank, kernel);
  s.stride.assign(rank, stride);
  s.validate();
  return s;
}

void MBConvSpec::validate() const {
  if (rank != 2 && rank != 3) throw std::invalid_argument("mbconv: rank must be 2 or 3");
  if (in_channels == 0 || out_channels == 0) throw std::invalid_argument("mbconv: channel counts must be positive");
  if (expansion != 1 && expansion != 6) throw std::invalid_argument("mbconv: expansion ratio must be 1 or 6");
  if (kernel.size() != rank || stride.size() != rank) {
    throw std::invalid_argument("mbconv: kernel and stride need one entry per spatial axis");
  }
  for (std::size_t a = 0; a < rank; ++a) {
    if (kernel[a] == 0 || kernel[a] % 2 == 0) throw std::invalid_argument("mbconv: kernels must be odd");
    if (stride[a] == 0) throw std::invalid_argument("mbconv: strides must be positive");
  }
  if (se_reduction == 0) throw std::invalid_argument("mbconv: se_reduction must be positive");
  if (!(survival > 0.0 && survival <= 1.0)) throw std::invalid_argument("mbconv: survival must lie in (0, 1]");
}

bool MBConvSpec::has_skip() const {
  return in_channels == out_channels &&
         std::all_of(stride.begin(), stride.end(), [](std::size_t s) { return s == 1; });
}

std::size_t MBConvSpec::se_channels() const { return std::max<std::size_t>(1, in_channels / se_reduction); }

ConvSpec MBConvSpec::expand_conv() const {
  return ConvSpec::cube(rank, in_channels, expanded_channels(), 1, 1, 0);
}

ConvSpec MBConvSpec::depthwise_conv() const {
  ConvSpec s;
  s.rank = rank;
  s.in_channels = s.out_channels = s.groups = expanded_channels();
  s.kernel = kernel;
  s.stride = stride;
  for (auto k : kernel) s.padding.push_back(k / 2);
  s.validate();
  return s;
}

ConvSpec MBConvSpec::project_conv() const {
  return ConvSpec::cube(rank, expanded_channels(), out_channels, 1, 1, 0);
}

template <class T>
MBConvParams<T> MBConvParams<T>::make(const MBConvSpec& spec, Rng& rng) {
  spec.validate();
  MBConvParams p;
  const std::size_t mid = spec.expanded_channels();
  if (spec.expansion != 1) {
    p.expand_weight = kaiming_uniform<T>(spec.expand_conv().weight_shape(), spec.in_channels, rng);
    p.expand_bn = BatchNormParams<T>::make(mid);
  }
  const auto dw = spec.depthwise_conv();
  p.depthwise_weight = kaiming_uniform<T>(dw.weight_shape(), dw.weight_count() / mid, rng);
  p.depthwise_bn = BatchNormParams<T>::make(mid);
  p.se = SqueezeExcitationParams<T>::make(mid, spec.se_channels(), rng);
  p.project_weight = kaiming_uniform<T>(spec.project_conv().weight_shape(), mid, rng);
  p.project_bn = BatchNormParams<T>::make(spec.out_channels);
  return p;
}

template <class T>
void MBConvParams<T>::register_into(ParameterSet<T>& set, const std::string& prefix) const {
  if (expand_weight.defined()) {
    set.add(prefix + ".expand.weight", expand_weight);
    set.add_batch_norm(prefix + ".expand.bn", expand_bn);
  }
  set.add(prefix + ".depthwise.weight", depthwise_weight);
  set.add_batch_norm(prefix + ".depthwise.bn", depthwise_bn);
  se.register_into(set, prefix + ".se");
  set.add(prefix + ".project.weight", project_weight);
  set.add_batch_norm(prefix + ".project.bn", project_bn);
}

template <class T>
Tensor<T> mbconv(const Tensor<T>& x, const MBConvSpec& spec, MBConvParams<T>& params, Mode mode, Rng& rng,
                 const BatchNormConfig& bn) {
  Tensor<T> h = x;
  if (spec.expansion != 1) {
    h = silu(batch_norm(conv_nd(h, spec.expand_conv(), params.expand_weight), params.expand_bn, mode, bn));
  }
  h = silu(batch_norm(conv_nd(h, spec.depthwise_conv(), params.depthwise_weight), params.depthwise_bn, mode, bn));
  h = squeeze_excitation(h, params.se);
  h = batch_norm(conv_nd(h, spec.project_conv(), params.project_weight), params.project_bn, mode, bn);
  if (!spec.has_skip()) return h;
  return add(x, drop_sample(h, spec.survival, mode, rng));
}

template struct SqueezeExcitationParams<float>;
template struct SqueezeExcitationParams<double>;
template struct MBConvParams<float>;
template struct MBConvParams<double>;
template Tensor<float> squeeze_excitation(const Tensor<float>&, const SqueezeExcitationParams<float>&);
template Tensor<double> squeeze_excitation(const Tensor<double>&, const SqueezeExcitationParams<double>&);
template Tensor<float> mbconv(const Tensor<float>&, const MBConvSpec&, MBConvParams<float>&, Mode, Rng&,
                              const BatchNormConfig&);
template Tensor<double> mbconv(const Tensor<double>&, const MBConvSpec&, MBConvParams<double>&, Mode, Rng&,
                               const BatchNormConfig&);

}  // namespace vesselnet::nn
