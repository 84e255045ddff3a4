#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lgtd/tensor.hpp"

namespace lgtd {

struct Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the dynamically recorded computation graph.
struct Node {
  Tensor value;
  Tensor grad;  // empty until something flows into it
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  // Reads self.grad and accumulates into inputs[i]->grad.
  std::function<void(Node& self)> backward;

  void accumulate_grad(const Tensor& g);
  void accumulate_grad(Tensor&& g);
  Tensor& grad_buffer();  // allocates a zero grad of value's shape on demand
};

/// Handle to a graph node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value, bool requires_grad = false);
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor& value() const { return node_->value; }
  Tensor& mutable_value() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  Tensor& mutable_grad() { return node_->grad_buffer(); }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  bool requires_grad() const { return node_ && node_->requires_grad; }
  const Shape& shape() const { return node_->value.shape(); }
  bool defined() const { return static_cast<bool>(node_); }
  const NodePtr& node() const { return node_; }

  /// Reverse-mode sweep from this node. Without a seed the output must be a
  /// single element and is seeded with 1.
  void backward() const;
  void backward(const Tensor& seed) const;

 private:
  NodePtr node_;
};

bool grad_enabled();

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Builds the output node of an op. When no input requires grad (or recording
/// is off) the backward closure is dropped and the node is a constant.
Var make_result(Tensor value, std::vector<Var> inputs, std::function<void(Node&)> backward);

}  // namespace lgtd
