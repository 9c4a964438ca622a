#include "vesselnet/nn/tensor.hpp"

#include <sstream>
#include <unordered_map>

namespace vesselnet::nn {

std::size_t shape_volume(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node<T>>()) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) throw ShapeError("tensor: axis " + std::to_string(i) + " has zero extent");
  }
  node_->value.assign(shape_volume(shape), fill);
  node_->shape = std::move(shape);
  node_->op = "leaf";
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node<T>>()) {
  if (values.size() != shape_volume(shape)) {
    throw ShapeError("tensor: " + std::to_string(values.size()) + " values do not fill shape " +
                     shape_string(shape));
  }
  node_->value = std::move(values);
  node_->shape = std::move(shape);
  node_->op = "leaf";
}

template <class T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape()) + " is not a scalar");
  return node_->value[0];
}

template <class T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

template <class T>
void Tensor<T>::zero_grad() {
  if (node_) node_->grad.assign(node_->value.size(), T(0));
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->value);
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> value, std::string op,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward) {
  auto out = Tensor<T>(std::move(shape), std::move(value));
  auto& node = *out.node();
  node.op = std::move(op);
  if (!grad_enabled()) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  node.requires_grad = true;
  for (const auto& in : inputs) node.parents.push_back(in.node());
  node.backward = std::move(backward);
  return out;
}

template <class T>
GradTape<T>::GradTape(const Tensor<T>& loss) : loss_(loss.node()) {
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward: loss must be a scalar");
  }
  // Iterative DFS post-order; a node seen again while still on the stack
  // closes a cycle.
  enum class Mark { Open, Done };
  std::unordered_map<Node<T>*, Mark> marks;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(loss_.get(), 0);
  marks[loss_.get()] = Mark::Open;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* parent = node->parents[next++].get();
      if (!parent->requires_grad) continue;
      auto it = marks.find(parent);
      if (it == marks.end()) {
        marks[parent] = Mark::Open;
        stack.emplace_back(parent, 0);
      } else if (it->second == Mark::Open) {
        throw std::logic_error("backward: cycle in gradient tape at op '" + parent->op + "'");
      }
    } else {
      marks[node] = Mark::Done;
      order_.push_back(node);
      stack.pop_back();
    }
  }
}

template <class T>
void GradTape<T>::backward() {
  for (auto* node : order_) node->ensure_grad();
  loss_->grad[0] += T(1);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward) node->backward(*node);
  }
}

template class Tensor<float>;
template class Tensor<double>;
template class GradTape<float>;
template class GradTape<double>;
template Tensor<float> make_result(Shape, std::vector<float>, std::string,
                                   const std::vector<Tensor<float>>&,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(Shape, std::vector<double>, std::string,
                                    const std::vector<Tensor<double>>&,
                                    std::function<void(Node<double>&)>);

}  // namespace vesselnet::nn
