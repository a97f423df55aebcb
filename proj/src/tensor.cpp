#include "gazeworld/tensor.hpp"

#include <unordered_map>
#include <unordered_set>

#include "gazeworld/kernels.hpp"

namespace gazeworld {

namespace {

// Reverse postorder over producer edges = valid backprop order (every node is
// processed after all of its consumers inside the reachable subgraph).
template <typename T>
std::vector<detail::Node<T>*> topo_order(detail::Node<T>* root) {
  std::vector<detail::Node<T>*> order;
  std::unordered_set<detail::Node<T>*> done;
  std::vector<std::pair<detail::Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (done.count(n) != 0) {
      stack.pop_back();
      continue;
    }
    if (next < n->parents.size()) {
      detail::Node<T>* p = n->parents[next].get();
      ++next;
      if (done.count(p) == 0 && p->requires_grad) stack.emplace_back(p, 0);
    } else {
      done.insert(n);
      order.push_back(n);
      stack.pop_back();
    }
  }
  return order;  // postorder; reversed by caller
}

}  // namespace

template <typename T>
void Tensor<T>::backward() const {
  detail::Node<T>* root = node_.get();
  if (root == nullptr || root->value.size() != 1) {
    throw std::invalid_argument("backward: loss must be a defined scalar");
  }
  if (!root->requires_grad) {
    throw std::invalid_argument("backward: loss does not require grad");
  }

  auto order = topo_order(root);

  std::unordered_map<detail::Node<T>*, std::vector<T>> pass;
  pass[root] = {T(1)};

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node<T>* n = *it;
    auto found = pass.find(n);
    if (found == pass.end()) continue;  // no gradient reached this node
    const std::vector<T>& g = found->second;

    if (n->parents.empty()) {
      // Leaf: fold the per-pass gradient into the persistent buffer.
      if (n->grad.empty()) n->grad.assign(n->value.size(), T(0));
      kernels::active<T>().add(n->grad.data(), g.data(), n->grad.data(), g.size());
      continue;
    }
    if (!n->backward) continue;

    std::function<T*(std::size_t)> parent_grad = [&](std::size_t i) -> T* {
      detail::Node<T>* p = n->parents[i].get();
      if (!p->requires_grad) return nullptr;
      auto& buf = pass[p];
      if (buf.empty()) buf.assign(p->value.size(), T(0));
      return buf.data();
    };
    detail::BackwardCtx<T> ctx{g.data(), *n, parent_grad};
    n->backward(ctx);
  }
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace gazeworld
