#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "msb/tensor.hpp"

namespace msb {

using NodeId = std::size_t;
class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  /// Accumulated gradient; zeros if backward never reached this node.
  Tensor grad() const;

 private:
  Tape* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Record-on-execute reverse-mode tape.
///
/// Nodes are appended in execution order, so every input precedes its
/// consumer. backward() walks the nodes in reverse and accumulates
/// gradients in that fixed order, which makes gradients bit-reproducible.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, NodeId)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Leaf bound to a parameter tensor by address; repeated calls return the
  /// same node so gradients from every use accumulate in one place.
  Var param(const Tensor& parameter);
  /// Gradient of a bound parameter, or zeros of its shape if it was not bound.
  Tensor grad_of(const Tensor& parameter) const;

  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

  // Used by primitive implementations.
  Var record(Tensor value, std::vector<NodeId> inputs, BackwardFn backward);
  const Tensor& value(NodeId id) const { return nodes_[id].value; }
  const Tensor& grad(NodeId id) const { return nodes_[id].grad; }
  bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }
  const std::vector<NodeId>& inputs(NodeId id) const { return nodes_[id].inputs; }
  void accumulate(NodeId id, const Tensor& g);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<NodeId> inputs;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::map<const Tensor*, NodeId> params_;
  bool grad_enabled_;
};

// Differentiable primitives. All operands must live on the same tape.
Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var elementwise_mul(Var a, Var b);
Var scale(Var a, double s);
Var add_row(Var a, Var bias);
Var softmax_rows(Var a);
Var layer_norm(Var a, Var gain, Var bias);
Var activation(Var a, Activation kind);
/// Scalar (shape {1}) sum of all entries.
Var sum(Var a);
Var mean(Var a);
Var reshape(Var a, Shape shape);
Var slice_cols(Var a, std::size_t start, std::size_t width);
Var concat_cols(std::span<const Var> parts);
Var resize_rows(Var a, std::size_t rows);
Var resize_cols(Var a, std::size_t cols);
Var permute_rows(Var a, std::span<const std::size_t> perm);
Var permute_cols(Var a, std::span<const std::size_t> perm);
Var blockdiag_left(Var blocks, Var x);
Var blockdiag_right(Var x, Var blocks);

/// Mean squared error (1/n)·Σ(pred − target)².
Var mse_loss(Var pred, Var target);

}  // namespace msb
