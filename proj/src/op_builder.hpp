#pragma once

#include <initializer_list>
#include <memory>
#include <utility>

#include "vpn/tensor.hpp"

namespace vpn {

// Shared plumbing for op implementations: allocates the output node, wires
// parents, propagates requires_grad, and installs the backward closure only
// when some input wants gradients.
struct OpBuilder {
  std::shared_ptr<detail::Node> node;

  OpBuilder(Shape shape, std::initializer_list<Tensor> parents) {
    node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value.assign(static_cast<std::size_t>(numel_of(node->shape)), 0.0);
    node->id = detail::next_node_id();
    for (const auto& p : parents) {
      node->requires_grad = node->requires_grad || p.requires_grad();
      node->parents.push_back(p.node());
    }
  }

  detail::Node* out() { return node.get(); }
  detail::Node* parent(std::size_t i) { return node->parents[i].get(); }

  template <typename Fn>
  Tensor finish(Fn&& fn) {
    if (node->requires_grad) node->backward = std::forward<Fn>(fn);
    return Tensor::adopt(std::move(node));
  }
};

}  // namespace vpn
