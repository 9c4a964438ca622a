#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vesselnet/nn/ops.hpp"
#include "vesselnet/nn/params.hpp"

namespace vesselnet::nn {

template <class T>
struct SqueezeExcitationParams {
  Tensor<T> reduce_weight;  // [C, R]
  Tensor<T> reduce_bias;    // [R]
  Tensor<T> expand_weight;  // [R, C]
  Tensor<T> expand_bias;    // [C]

  static SqueezeExcitationParams make(std::size_t channels, std::size_t reduced, Rng& rng);
  void register_into(ParameterSet<T>& set, const std::string& prefix) const;
};

// avg pool -> dense(C->R) -> SiLU -> dense(R->C) -> sigmoid -> channel scale
template <class T>
Tensor<T> squeeze_excitation(const Tensor<T>& x, const SqueezeExcitationParams<T>& p);

/// Inverted residual block. The squeeze width is max(1, in_channels /
/// se_reduction), measured against the block input as in EfficientNet-B0.
struct MBConvSpec {
  std::size_t rank = 3;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t expansion = 1;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::size_t se_reduction = 4;
  double survival = 0.5;

  static MBConvSpec cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                         std::size_t expansion, std::size_t kernel, std::size_t stride);

  void validate() const;
  bool has_skip() const;
  std::size_t expanded_channels() const { return in_channels * expansion; }
  std::size_t se_channels() const;
  ConvSpec expand_conv() const;
  ConvSpec depthwise_conv() const;
  ConvSpec project_conv() const;
};

template <class T>
struct MBConvParams {
  Tensor<T> expand_weight;  // undefined when expansion == 1
  BatchNormParams<T> expand_bn;
  Tensor<T> depthwise_weight;
  BatchNormParams<T> depthwise_bn;
  SqueezeExcitationParams<T> se;
  Tensor<T> project_weight;
  BatchNormParams<T> project_bn;

  static MBConvParams make(const MBConvSpec& spec, Rng& rng);
  void register_into(ParameterSet<T>& set, const std::string& prefix) const;
};

template <class T>
Tensor<T> mbconv(const Tensor<T>& x, const MBConvSpec& spec, MBConvParams<T>& params, Mode mode,
                 Rng& rng, const BatchNormConfig& bn = {});

}  // namespace vesselnet::nn
