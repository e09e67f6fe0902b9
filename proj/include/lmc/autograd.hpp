#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <utility>
#include <vector>

#include "lmc/tensor.hpp"

namespace lmc {

// Reverse-mode automatic differentiation over Tensor values. Every operation
// in ops.hpp records a Node with a closure that accumulates gradients into
// its inputs; backward() replays closures in reverse topological order.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& grad_buffer() {
    if (grad.empty() && !value.empty()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
class Var {
 public:
  Var() = default;
  explicit Var(Tensor<T> value, bool requires_grad = false)
      : node_(std::make_shared<Node<T>>()) {
    node_->value = std::move(value);
    node_->requires_grad = requires_grad;
  }
  explicit Var(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  bool defined() const { return static_cast<bool>(node_); }
  const Tensor<T>& value() const { return node_->value; }
  // Direct access for optimizers and initializers; never used inside a graph.
  Tensor<T>& mutable_value() { return node_->value; }
  const Tensor<T>& grad() const { return node_->grad; }
  Tensor<T>& mutable_grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }
  void zero_grad() { node_->grad = Tensor<T>(); }

  const Shape& shape() const { return node_->value.shape(); }
  int dim(int i) const { return node_->value.dim(i); }
  std::size_t size() const { return node_->value.size(); }

  const std::shared_ptr<Node<T>>& node() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Leaf variable owned by a model. Copies are deep: a copied model never
// shares storage with its source.
template <typename T>
class Parameter {
 public:
  Parameter() = default;
  explicit Parameter(Tensor<T> init, bool requires_grad = true)
      : var_(std::move(init), requires_grad) {}
  Parameter(const Parameter& o)
      : var_(o.var_.defined() ? Var<T>(o.var_.value(), o.var_.requires_grad())
                              : Var<T>()) {}
  Parameter& operator=(const Parameter& o) {
    if (this != &o) Parameter(o).swap(*this);
    return *this;
  }
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  Var<T>& var() { return var_; }
  const Var<T>& var() const { return var_; }
  operator const Var<T>&() const { return var_; }

  void swap(Parameter& o) noexcept { std::swap(var_, o.var_); }

 private:
  Var<T> var_;
};

// Disables graph recording on this thread for the guard's lifetime.
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

// Builds the result node of an operation. The closure is stored only when
// recording is enabled and at least one input requires a gradient.
template <typename T>
Var<T> make_result(Tensor<T> value, std::initializer_list<Var<T>> inputs,
                   std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->value = std::move(value);
  if (grad_enabled()) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      for (const auto& in : inputs) node->inputs.push_back(in.node());
      node->backward_fn = std::move(backward_fn);
    }
  }
  return Var<T>(std::move(node));
}

// Seeds d(root)/d(root) = 1 (root must hold a single element) and propagates.
// Gradients accumulate into every reachable node with requires_grad set.
template <typename T>
void backward(const Var<T>& root);

}  // namespace lmc
