#include "clade/tensor.hpp"

#include <unordered_set>

#include "clade/error.hpp"

namespace clade {
namespace {
thread_local bool g_grad_enabled = true;

template <typename T>
std::vector<Node<T>*> topo_order(Node<T>* root, bool grad_only) {
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  // Iterative post-order DFS; graphs from deep residual stacks overflow
  // recursion budgets on small stacks.
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if ((!grad_only || p->requires_grad) && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  return order;
}
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

template <typename T>
Array<T>& Node<T>::ensure_grad() {
  if (grad.empty()) grad = Array<T>(value.shape(), T(0));
  return grad;
}

template <typename T>
Tensor<T> Tensor<T>::constant(Array<T> value) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Array<T> value, std::string name) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = true;
  n->name = std::move(name);
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::from_op(Array<T> value, std::string op, const std::vector<Tensor>& parents,
                             std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->op = std::move(op);
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (g_grad_enabled && needs) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward_fn);
  } else if (g_grad_enabled) {
    // Keep topology for structural inspection even when nothing needs grad.
    for (const auto& p : parents) n->parents.push_back(p.node());
  }
  return Tensor(std::move(n));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
Array<T> Tensor<T>::grad() const {
  if (node_->grad.empty()) return Array<T>(shape(), T(0));
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  node_->grad = Array<T>();
}

template <typename T>
Array<T>& Tensor<T>::mutable_value() {
  if (!node_->is_leaf()) throw ContractError("mutable_value() on non-leaf tensor '" + node_->op + "'");
  ++node_->version;
  return node_->value;
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) return;
  Node<T>* root = loss.node().get();
  auto order = topo_order(root, true);
  for (Node<T>* n : order)
    if (!n->is_leaf()) n->grad = Array<T>();
  root->ensure_grad()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->is_leaf() || n->grad.empty()) continue;
    n->backward(*n);
  }
  for (Node<T>* n : order)
    if (!n->is_leaf()) n->grad = Array<T>();
}

template <typename T>
std::vector<std::string> graph_ops(const Tensor<T>& root) {
  std::vector<std::string> ops;
  for (Node<T>* n : topo_order(root.node().get(), false)) ops.push_back(n->op);
  return ops;
}

template struct Node<float>;
template struct Node<double>;
template class Tensor<float>;
template class Tensor<double>;
template void backward<float>(const Tensor<float>&);
template void backward<double>(const Tensor<double>&);
template std::vector<std::string> graph_ops<float>(const Tensor<float>&);
template std::vector<std::string> graph_ops<double>(const Tensor<double>&);

}  // namespace clade
