#pragma once

// Parameter checkpoint container, version 1.
//
// A UTF-8 text manifest followed immediately by a binary payload:
//
//   VNCK 1\n
//   meta <key> <value...>\n                       (zero or more)
//   tensor <name> <trainable 0|1> <shape> <offset> <bytes>\n   (one per tensor)
//   end\n
//   <payload>
//
// <shape> is the extents joined by 'x' (e.g. 16x1x3x3x3). <offset> and
// <bytes> locate the tensor inside the payload, which starts at the byte
// after "end\n" and holds IEEE-754 binary32 values in little-endian order,
// row-major. Tensors appear in registry order with no padding between them.
// Names and meta keys contain no whitespace; meta values run to end of line.

#include <string>
#include <utility>
#include <vector>

#include "vesselnet/nn/params.hpp"

namespace vesselnet::nn {

struct CheckpointTensor {
  std::string name;
  Shape shape;
  bool trainable = true;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<CheckpointTensor> tensors;

  const std::string* meta_value(const std::string& key) const;
};

Checkpoint snapshot(const ParameterSet<float>& params,
                    std::vector<std::pair<std::string, std::string>> meta = {});

// Copies values into an existing registry; names and shapes must match.
void restore(const Checkpoint& checkpoint, ParameterSet<float>& params);

// Writes through a temporary file and renames, so a failed write never
// leaves a truncated checkpoint at `path`.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace vesselnet::nn
