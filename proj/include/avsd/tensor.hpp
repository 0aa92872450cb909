#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace avsd::nc {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
struct Node;

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

// One vertex of the computation record. `backward_fn` reads this node's grad
// and accumulates into the grads of `parents`; it is only set when at least
// one parent requires a gradient.
template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  std::vector<NodePtr<T>> parents;
  std::function<void(Node<T>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Recording is on by default. While a guard is alive on the current thread,
// operations produce constant results and keep no parents.
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

// Dense row-major array participating in reverse-mode differentiation.
// Copies share the underlying node.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T v, bool requires_grad = false);
  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }
  static Tensor from_node(NodePtr<T> node);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const T> data() const { return node_->value; }
  // Leaves only (parameters, inputs being perturbed by a gradient check).
  std::span<T> mutable_data() { return node_->value; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() { node_->grad.assign(node_->value.size(), T(0)); }

  T item() const;
  T at(std::size_t i, std::size_t j) const { return node_->value[i * node_->shape.at(1) + j]; }

  // Populate grads of every requires_grad ancestor. The tensor must hold
  // exactly one value.
  void backward() const;

  // Same values, no history.
  Tensor detach() const;

  const NodePtr<T>& node() const { return node_; }

 private:
  NodePtr<T> node_;
};

// Builds the result node of an operation. Parents are retained only when
// recording is enabled and one of them requires a gradient.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::vector<NodePtr<T>> parents,
                      std::function<void(Node<T>&)> backward_fn);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace avsd::nc
