#include "vesselnet/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace vesselnet::nn {

template <class T>
void ParameterSet<T>::add(const std::string& name, const Tensor<T>& tensor, bool trainable) {
  if (find(name)) throw std::invalid_argument("parameter '" + name + "' registered twice");
  if (!tensor.defined()) throw std::invalid_argument("parameter '" + name + "' is undefined");
  entries_.push_back({name, tensor, trainable});
}

template <class T>
void ParameterSet<T>::add_batch_norm(const std::string& prefix, const BatchNormParams<T>& bn) {
  add(prefix + ".gamma", bn.gamma);
  add(prefix + ".beta", bn.beta);
  add(prefix + ".running_mean", bn.running_mean, false);
  add(prefix + ".running_var", bn.running_var, false);
}

template <class T>
const typename ParameterSet<T>::Entry* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

template <class T>
std::size_t ParameterSet<T>::trainable_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.trainable) n += e.tensor.size();
  }
  return n;
}

template <class T>
void ParameterSet<T>::zero_grad() {
  for (auto& e : entries_) {
    if (e.trainable) e.tensor.zero_grad();
  }
}

template <class T>
Tensor<T> kaiming_uniform(const Shape& shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  Tensor<T> t(shape);
  for (auto& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
  t.set_requires_grad(true);
  return t;
}

template <class T>
Tensor<T> zeros_param(const Shape& shape) {
  Tensor<T> t(shape);
  t.set_requires_grad(true);
  return t;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template Tensor<float> kaiming_uniform(const Shape&, std::size_t, Rng&);
template Tensor<double> kaiming_uniform(const Shape&, std::size_t, Rng&);
template Tensor<float> zeros_param(const Shape&);
template Tensor<double> zeros_param(const Shape&);

}  // namespace vesselnet::nn
