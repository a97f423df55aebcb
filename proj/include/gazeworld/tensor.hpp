#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gazeworld {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

namespace autograd {

namespace detail {
inline thread_local int no_grad_depth = 0;
}

inline bool grad_enabled() { return detail::no_grad_depth == 0; }

// RAII scope that suppresses graph recording (target encoder, probes, EMA).
class NoGradGuard {
 public:
  NoGradGuard() { ++detail::no_grad_depth; }
  ~NoGradGuard() { --detail::no_grad_depth; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace autograd

namespace detail {

template <typename T>
struct Node;

// Passed to backward closures: the node's incoming gradient plus an accessor
// that lazily allocates a parent's per-pass gradient buffer (nullptr when the
// parent does not participate in gradient flow).
template <typename T>
struct BackwardCtx {
  const T* out_grad;
  Node<T>& node;
  const std::function<T*(std::size_t)>& parent_grad;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // persistent; leaves only, lazily allocated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<T>>> parents;
  std::function<void(const BackwardCtx<T>&)> backward;
};

}  // namespace detail

// Dense row-major tensor with reverse-mode autodiff. Value-semantic handle
// over a shared graph node; graphs are built implicitly by the ops in
// ops.hpp whenever an input requires grad and no NoGradGuard is active.
//
// Gradient contract: backward() may only be called on scalars; per-pass
// gradients are temporary except at leaves (parentless requires-grad nodes),
// where they accumulate additively into grad() until zero_grad().
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape) {
    return from(std::move(shape), {});
  }

  static Tensor full(Shape shape, T v) {
    auto n = std::make_shared<detail::Node<T>>();
    n->value.assign(shape_size(shape), v);
    n->shape = std::move(shape);
    return Tensor(std::move(n));
  }

  static Tensor from(Shape shape, std::vector<T> data) {
    auto n = std::make_shared<detail::Node<T>>();
    if (data.empty()) data.assign(shape_size(shape), T(0));
    if (data.size() != shape_size(shape)) {
      throw std::invalid_argument("Tensor::from: data length does not match shape");
    }
    n->shape = std::move(shape);
    n->value = std::move(data);
    return Tensor(std::move(n));
  }

  static Tensor scalar(T v) { return full({1}, v); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }

  // 2-D helpers; 1-D tensors behave as a single row.
  std::size_t rows() const { return node_->shape.size() < 2 ? 1 : node_->shape[0]; }
  std::size_t cols() const {
    const auto& s = node_->shape;
    return s.empty() ? 1 : s.back();
  }

  std::span<const T> data() const { return {node_->value.data(), node_->value.size()}; }

  // Direct mutation of the underlying buffer. Only valid for nodes that are
  // not part of a live graph (parameters between steps, EMA targets).
  std::span<T> raw_data() { return {node_->value.data(), node_->value.size()}; }

  T item() const {
    if (size() != 1) throw std::invalid_argument("Tensor::item: tensor is not scalar");
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }

  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return {node_->grad.data(), node_->grad.size()}; }
  std::span<T> grad_mut() {
    if (node_->grad.empty()) node_->grad.assign(size(), T(0));
    return {node_->grad.data(), node_->grad.size()};
  }
  void zero_grad() { node_->grad.clear(); }

  // Same values, no graph history, no grad requirement.
  Tensor detach() const {
    auto n = std::make_shared<detail::Node<T>>();
    n->shape = node_->shape;
    n->value = node_->value;
    return Tensor(std::move(n));
  }

  void backward() const;

  detail::Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node<T>>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::Node<T>> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::Node<T>> node_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace gazeworld
