#pragma once

// Reverse-mode automatic differentiation over Array values.
//
// A Tensor is a handle to a graph node. Leaves are either constants or
// parameters (requires_grad). Every op returns a fresh node; nothing that
// participates in a graph is mutated in place, the optimizer only touches
// parameter leaves between steps. Graphs are rebuilt every step and dropped
// with their last handle.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "clade/array.hpp"

namespace clade {

template <typename T>
struct Node {
  Array<T> value;
  // Empty until something writes a gradient. Leaf grads persist and
  // accumulate across backward calls; interior grads live for one pass.
  Array<T> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  // Bumped whenever the optimizer rewrites a leaf.
  std::uint64_t version = 0;

  bool is_leaf() const { return !backward; }
  Array<T>& ensure_grad();
};

// Disables graph recording on the current thread for its lifetime.
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

template <typename T>
class Tensor {
 public:
  using NodePtr = std::shared_ptr<Node<T>>;

  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor constant(Array<T> value);
  static Tensor parameter(Array<T> value, std::string name = {});
  static Tensor scalar(T v) { return constant(Array<T>({1}, v)); }

  // Builds an op result. Records parents and the backward closure only when
  // grad mode is on and some parent requires grad.
  static Tensor from_op(Array<T> value, std::string op, const std::vector<Tensor>& parents,
                        std::function<void(Node<T>&)> backward);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t size() const { return node_->value.size(); }
  const Array<T>& value() const { return node_->value; }
  const T* data() const { return node_->value.data(); }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  // Gradient buffer; all zeros when nothing has been accumulated yet.
  Array<T> grad() const;
  void zero_grad();

  // Leaf-only mutation used by the optimizer and checkpoint loader.
  Array<T>& mutable_value();
  std::uint64_t version() const { return node_->version; }

  const std::string& op() const { return node_->op; }
  const std::string& name() const { return node_->name; }
  Tensor detach() const { return constant(node_->value); }

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

// Accumulates d(loss)/d(leaf) into every requires_grad leaf reachable from
// loss. loss must hold exactly one element.
template <typename T>
void backward(const Tensor<T>& loss);

// Op names of every node reachable from root (including root), in
// topological order. Used for structural assertions on built networks.
template <typename T>
std::vector<std::string> graph_ops(const Tensor<T>& root);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace clade
