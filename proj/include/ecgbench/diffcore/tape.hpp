#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ecgbench/diffcore/array.hpp"

namespace ecgbench::diff {

template <class T>
class Tape;

/// Handle to a value recorded on a tape.
template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  const Array<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t axis) const { return value().dim(axis); }
  std::size_t size() const { return value().size(); }
};

/// Define-by-run reverse-mode tape. Entries are appended in execution order,
/// so the entry list is already topologically sorted; backward() walks it once
/// in reverse. A tape belongs to a single thread.
template <class T>
class Tape {
 public:
  /// Receives the output gradient; must call accumulate() for its inputs.
  using BackwardFn = std::function<void(Tape&, std::span<const T>)>;

  Var<T> leaf(Array<T> value) { return push(std::move(value), true, {}, nullptr, "leaf"); }

  Var<T> constant(Array<T> value) {
    return push(std::move(value), false, {}, nullptr, "constant");
  }

  /// Appends a primitive application. The backward rule is dropped when no
  /// input carries a gradient.
  Var<T> record(Array<T> value, std::vector<int> inputs, BackwardFn fn,
                const char* op) {
    bool needs = false;
    for (int in : inputs) needs = needs || nodes_.at(in).requires_grad;
    if (!needs) fn = nullptr;
    return push(std::move(value), needs, std::move(inputs), std::move(fn), op);
  }

  const Array<T>& value(Var<T> v) const { return nodes_.at(v.id).value; }
  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(Var<T> v) const { return requires_grad(v.id); }
  const char* op_name(Var<T> v) const { return nodes_.at(v.id).op; }
  const std::vector<int>& inputs(Var<T> v) const { return nodes_.at(v.id).inputs; }
  std::size_t size() const { return nodes_.size(); }

  /// Adds `g` into the gradient slot of node `id`; no-op for constants.
  void accumulate(int id, std::span<const T> g) {
    Node& n = nodes_.at(id);
    if (!n.requires_grad) return;
    if (g.size() != n.value.size()) {
      throw ShapeError(std::string("gradient size mismatch at node ") + n.op);
    }
    if (n.grad.empty()) {
      n.grad.assign(g.begin(), g.end());
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) n.grad[i] += g[i];
    }
  }

  /// Mutable gradient buffer of `id`, zero-initialised on first use. Empty for
  /// nodes that carry no gradient.
  std::span<T> grad_buffer(int id) {
    Node& n = nodes_.at(id);
    if (!n.requires_grad) return {};
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  /// Gradient of the last backward() root w.r.t. leaf `v` (zeros if unreached).
  Array<T> grad(Var<T> v) const {
    const Node& n = nodes_.at(v.id);
    if (n.grad.empty()) return Array<T>(n.value.shape(), T(0));
    return Array<T>(n.value.shape(), n.grad);
  }

  void backward(Var<T> root) {
    if (root.tape != this) throw std::invalid_argument("root recorded on another tape");
    if (nodes_.at(root.id).value.size() != 1) {
      throw ShapeError("backward() needs a scalar root, got shape " +
                       to_string(nodes_[root.id].value.shape()));
    }
    for (auto& n : nodes_) n.grad.clear();
    if (!nodes_[root.id].requires_grad) return;
    nodes_[root.id].grad.assign(1, T(1));
    for (int i = root.id; i >= 0; --i) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      // Inputs always precede their output, so the rule never touches n.grad.
      n.backward(*this, std::span<const T>(n.grad));
      // interior gradients are consumed; only leaves keep theirs
      std::vector<T>().swap(n.grad);
    }
  }

 private:
  struct Node {
    Array<T> value;
    bool requires_grad = false;
    std::vector<int> inputs;
    BackwardFn backward;
    const char* op = "";
    std::vector<T> grad;
  };

  Var<T> push(Array<T> value, bool requires_grad, std::vector<int> inputs,
              BackwardFn fn, const char* op) {
    nodes_.push_back(Node{std::move(value), requires_grad, std::move(inputs),
                          std::move(fn), op, {}});
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  std::vector<Node> nodes_;
};

}  // namespace ecgbench::diff
