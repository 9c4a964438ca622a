#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vesselnet::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_volume(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Thrown by every op whose operands have incompatible extents. The message
/// names the op and the offending axis.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string op;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents' grads.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

/// Dense row-major array (last axis fastest) with an optional link into the
/// reverse-mode graph. Copies share storage; use clone() for a deep copy.
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  T item() const;

  bool requires_grad() const { return node_ && node_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return node_ && node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad();

  // Same values, no graph history.
  Tensor detach() const;
  Tensor clone() const { return detach(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node<T>> node) {
    Tensor t;
    t.node_ = std::move(node);
    return t;
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Thread-local switch that suppresses graph recording (eval passes).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output node of an op. The backward closure is attached only
/// when recording is on and some input requires a gradient.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::string op,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward);

/// Topologically ordered view of the graph reachable from a scalar loss.
template <class T>
class GradTape {
 public:
  explicit GradTape(const Tensor<T>& loss);

  // Loss last; every node appears after all of its parents.
  const std::vector<Node<T>*>& nodes() const { return order_; }

  // Seeds d(loss)/d(loss) = 1 and visits each node exactly once.
  void backward();

 private:
  std::shared_ptr<Node<T>> loss_;
  std::vector<Node<T>*> order_;
};

template <class T>
void backward(const Tensor<T>& loss) {
  GradTape<T>(loss).backward();
}

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class GradTape<float>;
extern template class GradTape<double>;

}  // namespace vesselnet::nn
