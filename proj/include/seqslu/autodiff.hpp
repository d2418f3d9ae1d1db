#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "seqslu/tensor.hpp"

namespace seqslu {

template <typename T>
struct Node {
  Tensor<T> value;
  // Empty until something accumulates into it.
  Tensor<T> grad;
  std::vector<std::shared_ptr<Node>> parents;
  // Propagates this->grad into parents' grads.
  std::function<void(Node&)> backward;
  bool requires_grad = false;
  const char* op = "leaf";

  Tensor<T>& grad_buffer() {
    if (grad.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

// Handle to a node of the recorded computation graph. Copies share the node.
template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  const Tensor<T>& value() const { return node_->value; }
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad = Tensor<T>(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const Shape& shape() const { return node_->value.shape(); }
  int64_t rows() const { return node_->value.rows(); }
  int64_t cols() const { return node_->value.cols(); }
  bool defined() const { return node_ != nullptr; }
  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

template <typename T>
Var<T> constant(Tensor<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Var<T>(std::move(n));
}

template <typename T>
Var<T> parameter(Tensor<T> value) {
  Var<T> v = constant(std::move(value));
  v.set_requires_grad(true);
  return v;
}

// While alive on a thread, recorded ops keep no graph edges, so nothing
// can be backpropagated through them. Used for inference.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

// Records an operation node. Throws NumericalError if `value` is not finite.
// `backward` is only kept when some parent requires a gradient.
template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward);

// Reverse-mode sweep from a scalar output; gradients accumulate into every
// reachable node that requires one.
template <typename T>
void backward(const Var<T>& loss);

extern template Var<float> make_op(const char*, Tensor<float>, std::vector<Var<float>>,
                                   std::function<void(Node<float>&)>);
extern template Var<double> make_op(const char*, Tensor<double>, std::vector<Var<double>>,
                                    std::function<void(Node<double>&)>);
extern template void backward(const Var<float>&);
extern template void backward(const Var<double>&);

}  // namespace seqslu
