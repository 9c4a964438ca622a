#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vesselnet/nn/tensor.hpp"
#include "vesselnet/rng.hpp"

namespace vesselnet::nn {

enum class Mode { Train, Eval };
enum class ActivationKind { SiLU, ReLU, Sigmoid };
enum class PoolKind { Max, Avg };

// Convolution geometry for rank 2 (H, W) or rank 3 (D, H, W) spatial input.
// Cross-correlation semantics, no kernel flip. groups == in_channels ==
// out_channels is a depthwise convolution.
struct ConvSpec {
  std::size_t rank = 2;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t groups = 1;
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  std::vector<std::size_t> padding;

  // Cubic kernel with "same" padding (k / 2) unless padding is given.
  static ConvSpec cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                       std::size_t kernel, std::size_t stride = 1);
  static ConvSpec cube(std::size_t rank, std::size_t in_channels, std::size_t out_channels,
                       std::size_t kernel, std::size_t stride, std::size_t padding,
                       std::size_t groups = 1);

  void validate() const;
  Shape weight_shape() const;
  std::size_t weight_count() const { return shape_volume(weight_shape()); }
  // floor((in + 2 pad - kernel) / stride) + 1 per axis; throws ShapeError
  // naming the axis when that is < 1.
  Shape output_spatial(std::span<const std::size_t> input_spatial) const;
};

struct BatchNormConfig {
  double epsilon = 1e-5;
  double momentum = 0.1;
};

template <class T>
struct BatchNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  Tensor<T> running_mean;  // buffers, never differentiated
  Tensor<T> running_var;

  static BatchNormParams make(std::size_t channels);
  std::size_t channels() const { return gamma.size(); }
};

template <class T>
Tensor<T> conv_nd(const Tensor<T>& input, const ConvSpec& spec, const Tensor<T>& weight,
                  const Tensor<T>& bias = {});

// Train: per-channel batch statistics (biased variance) and a running-stat
// update; eval: running statistics.
template <class T>
Tensor<T> batch_norm(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                     const BatchNormConfig& config = {});

template <class T>
Tensor<T> activation(ActivationKind kind, const Tensor<T>& x);

template <class T>
Tensor<T> silu(const Tensor<T>& x) { return activation(ActivationKind::SiLU, x); }
template <class T>
Tensor<T> relu(const Tensor<T>& x) { return activation(ActivationKind::ReLU, x); }
template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) { return activation(ActivationKind::Sigmoid, x); }

// [B, C, spatial...] -> [B, C]
template <class T>
Tensor<T> global_pool(PoolKind kind, const Tensor<T>& x);

// [B, F] x [F, G] + [G] -> [B, G]
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// x[B, C, spatial...] * gate[B, C]
template <class T>
Tensor<T> scale_channels(const Tensor<T>& x, const Tensor<T>& gate);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise mean of equally shaped tensors.
template <class T>
Tensor<T> mean_of(const std::vector<Tensor<T>>& xs);

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

// Stride-1 average pool with k/2 padding; padded cells are excluded from
// the divisor.
template <class T>
Tensor<T> avg_pool_same(const Tensor<T>& x, std::size_t kernel);

// Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate).
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double rate, Mode mode, Rng& rng);

// Whole-sample Bernoulli(survival) mask along axis 0; survivors scaled by
// 1/survival (2 at the default 0.5).
template <class T>
Tensor<T> drop_sample(const Tensor<T>& x, double survival, Mode mode, Rng& rng);

template <class T>
struct CrossEntropyResult {
  Tensor<T> loss;        // scalar mean negative log-likelihood
  std::vector<T> probs;  // [B, classes] row-major softmax
};

template <class T>
CrossEntropyResult<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace vesselnet::nn
