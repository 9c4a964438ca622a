#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "vesselnet/nn/ops.hpp"
#include "vesselnet/nn/tensor.hpp"
#include "vesselnet/rng.hpp"

namespace vesselnet::nn {

/// Ordered, name-addressed registry of a model's tensors. Buffers (BN
/// running statistics) are registered as non-trainable so that they are
/// checkpointed but skipped by the optimizer.
template <class T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable;
  };

  void add(const std::string& name, const Tensor<T>& tensor, bool trainable = true);
  void add_batch_norm(const std::string& prefix, const BatchNormParams<T>& bn);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const Entry* find(const std::string& name) const;

  // Scalar count over trainable tensors only.
  std::size_t trainable_scalars() const;
  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

// U(-b, b) with b = sqrt(6 / fan_in); requires_grad is set.
template <class T>
Tensor<T> kaiming_uniform(const Shape& shape, std::size_t fan_in, Rng& rng);

template <class T>
Tensor<T> zeros_param(const Shape& shape);

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;

}  // namespace vesselnet::nn
