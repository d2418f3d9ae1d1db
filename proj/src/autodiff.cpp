#include "seqslu/autodiff.hpp"

#include <unordered_set>

#include "seqslu/errors.hpp"

namespace seqslu {
namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Var<T> make_op(const char* op, Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void(Node<T>&)> backward) {
  if (!value.all_finite()) {
    throw NumericalError(std::string("non-finite value produced by ") + op);
  }
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = op;
  if (g_grad_enabled)
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.shared());
    n->backward = std::move(backward);
  }
  return Var<T>(std::move(n));
}

template <typename T>
void backward(const Var<T>& loss) {
  if (loss.value().size() != 1) {
    throw std::invalid_argument("backward() needs a scalar output, got " + shape_str(loss.shape()));
  }
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node<T>* n : order) {
    if (!n->grad.empty() && !n->grad.all_finite()) {
      throw NumericalError(std::string("non-finite gradient at ") + n->op);
    }
  }
}

template Var<float> make_op(const char*, Tensor<float>, std::vector<Var<float>>,
                            std::function<void(Node<float>&)>);
template Var<double> make_op(const char*, Tensor<double>, std::vector<Var<double>>,
                             std::function<void(Node<double>&)>);
template void backward(const Var<float>&);
template void backward(const Var<double>&);

}  // namespace seqslu
