#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gsr/numcore/tensor.hpp"

namespace gsr {

template <class T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <class T>
struct Var {
  Graph<T>* graph = nullptr;
  std::uint32_t id = 0;

  const Tensor<T>& value() const { return graph->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t size() const { return value().size(); }
  T item() const { return value()[0]; }
  bool requires_grad() const { return graph->requires_grad(*this); }
  /// Accumulated gradient after backward(); zeros when nothing reached the node.
  Tensor<T> grad() const { return graph->grad(*this); }
};

/// Define-by-run tape. Nodes are appended in creation order, which is a valid
/// topological order because every op only consumes existing nodes.
template <class T>
class Graph {
 public:
  /// Receives the node's own id and output gradient; accumulates into inputs via
  /// Graph::grad_ref.
  using Backward = std::function<void(Graph&, std::uint32_t, std::span<const T>)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Tensor<T> value) { return push(std::move(value), false, {}); }
  Var<T> variable(Tensor<T> value) { return push(std::move(value), true, {}); }

  /// Appends an op result. The backward rule is dropped when no input needs gradients.
  Var<T> push(Tensor<T> value, bool requires_grad, Backward backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var<T>{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
  }

  const Tensor<T>& value(Var<T> v) const { return nodes_[v.id].value; }
  const Tensor<T>& value(std::uint32_t id) const { return nodes_[id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Tensor<T> grad(Var<T> v) const {
    const Node& n = nodes_[v.id];
    if (n.grad.empty()) return Tensor<T>(n.value.shape());
    return Tensor<T>(n.value.shape(), n.grad);
  }

  /// Mutable gradient buffer of a node, allocated zeroed on first use.
  std::span<T> grad_ref(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  /// Seeds d(root)/d(root) = 1 for every root entry and sweeps the tape backwards,
  /// visiting each node once.
  void backward(Var<T> root) {
    if (root.graph != this) throw std::logic_error("backward: foreign node");
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[root.id].requires_grad) return;
    auto seed = grad_ref(root.id);
    std::fill(seed.begin(), seed.end(), T(1));
    for (std::int64_t i = root.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(*this, static_cast<std::uint32_t>(i), std::span<const T>(n.grad));
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
};

}  // namespace gsr
