#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vesselnet/io.hpp"
#include "vesselnet/nn/tensor.hpp"
#include "vesselnet/synthgen.hpp"
#include "vesselnet/volume.hpp"

namespace vesselnet::data {

struct Sample {
  std::string id;
  std::string group;  // samples sharing a group stay in one fold
  int label = 0;
  std::vector<float> input;
};

/// Fixed-shape labelled samples ready for batching.
struct Dataset {
  nn::Shape sample_shape;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  std::vector<int> labels() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Stacks samples into [B, sample_shape...].
nn::Tensor<float> make_batch(const Dataset& ds, std::span<const std::size_t> indices);

/// How a mask volume becomes a network input. Both paths first OR-downsample
/// to `downsample`. The 2D path then projects and resizes every view to
/// rows x cols (nearest neighbour), stacked frontal, transverse, sagittal.
struct PrepConfig {
  Dims downsample{128, 64, 128};
  std::size_t rows = kDefaultViewRows;
  std::size_t cols = kDefaultViewCols;

  void write(KeyValueFile& kv) const;  // data.downsample, data.rows, data.cols
  static PrepConfig read(const KeyValueFile& kv);
  static PrepConfig read(const KeyValueFile& kv, const PrepConfig& fallback);
};

std::vector<float> views_input(const MaskVolume& v, const PrepConfig& prep);
std::vector<float> volume_input(const MaskVolume& v, const PrepConfig& prep);

enum class InputKind { Views, Volume };

nn::Shape sample_shape(InputKind kind, const PrepConfig& prep);

// Streams a dataset directory (manifest + VMK1 files) through the prep.
Dataset load_dataset(const std::string& dir, InputKind kind, const PrepConfig& prep);

// Renders planned synthetic subjects one at a time and keeps only inputs.
Dataset synthetic_dataset(const std::vector<synth::SubjectPlan>& plans, Dims canvas, InputKind kind,
                          const PrepConfig& prep);

// Copies view slot `view` into all three slots of every sample.
Dataset replicate_view(const Dataset& ds, View view);

}  // namespace vesselnet::data
