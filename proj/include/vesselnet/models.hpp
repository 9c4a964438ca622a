#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "vesselnet/io.hpp"
#include "vesselnet/nn/blocks.hpp"
#include "vesselnet/nn/params.hpp"
#include "vesselnet/volume.hpp"

namespace vesselnet::models {

struct StageSpec {
  std::size_t out_channels;
  std::size_t repeats;
  std::size_t kernel;
  std::size_t stride;
  std::size_t expansion;

  bool operator==(const StageSpec&) const = default;
};

/// EfficientNet-style 3D classifier. The default table is B0's layout with
/// cubic kernels.
struct Model3DSpec {
  std::size_t stem_channels = 32;
  std::size_t stem_kernel = 3;
  std::size_t stem_stride = 2;
  std::vector<StageSpec> stages = {{16, 1, 3, 1, 1}, {24, 2, 3, 2, 6}, {40, 2, 5, 2, 6},  {80, 3, 3, 2, 6},
                                   {112, 3, 5, 1, 6}, {192, 4, 5, 2, 6}, {320, 1, 3, 1, 6}};
  std::size_t head_channels = 1280;
  Dims input{128, 64, 128};
  std::size_t classes = 2;
  std::size_t se_reduction = 4;
  double survival = 0.5;

  // stem 8, stages [8, 16], head 32, input 32x16x32
  static Model3DSpec reduced();

  void validate() const;
  nn::ConvSpec stem() const;
  // One entry per block; the first block of a stage carries its stride.
  std::vector<nn::MBConvSpec> blocks() const;
  nn::ConvSpec head() const;

  bool operator==(const Model3DSpec&) const = default;
};

enum class FilterMode {
  Constant,  // every FEB conv layer has 4(n+1) filters
  Indexed,   // layer i (1-based) has 4(i+1) filters
};

/// Multi-view 2D classifier: a feature extraction block (FEB) of n conv
/// layers and p Inception-A blocks, averaged over the three views, global
/// max pooled, then m hidden dense layers of width 6m.
struct Model2DSpec {
  std::size_t m = 1;
  std::size_t n = 4;
  std::size_t p = 6;
  bool feb_shared = true;
  FilterMode filters = FilterMode::Constant;
  double dropout = 0.2;
  std::size_t rows = kDefaultViewRows;
  std::size_t cols = kDefaultViewCols;
  std::size_t classes = 2;

  void validate() const;
  // 0-based layer index.
  std::size_t conv_filters(std::size_t layer) const;
  std::size_t feature_channels() const { return conv_filters(n - 1); }
  std::size_t hidden_width() const { return 6 * m; }

  bool operator==(const Model2DSpec&) const = default;
};

using ModelSpec = std::variant<Model3DSpec, Model2DSpec>;

// Keys are prefixed "model."; model.kind is efficientnet3d or cnn2d.
void write_spec(const ModelSpec& spec, KeyValueFile& kv);
ModelSpec read_spec(const KeyValueFile& kv);
std::set<std::string> spec_keys();
std::string model_kind(const ModelSpec& spec);

class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual const ModelSpec& spec() const = 0;
  // Per-sample input shape (no batch axis).
  virtual nn::Shape sample_shape() const = 0;
  // Returns [B, classes] logits.
  virtual nn::Tensor<float> forward(const nn::Tensor<float>& input, nn::Mode mode, Rng& rng) = 0;

  nn::ParameterSet<float>& parameters() { return params_; }
  const nn::ParameterSet<float>& parameters() const { return params_; }

 protected:
  nn::ParameterSet<float> params_;
};

// Validates the spec (ConfigError naming the violated constraint) and
// initializes every parameter from `seed`.
std::unique_ptr<Classifier> build_model(const ModelSpec& spec, std::uint64_t seed);

}  // namespace vesselnet::models
