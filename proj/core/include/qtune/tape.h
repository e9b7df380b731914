// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#ifndef QTUNE_TAPE_H_
#define QTUNE_TAPE_H_

#include <functional>
#include <string>
#include <vector>

#include "qtune/tensor.h"

namespace qtune {

// A named trainable tensor. Gradients accumulate across a batch and are
// cleared by the optimizer step.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;

  Param() = default;
  Param(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void ZeroGrad() { std::fill(grad.values().begin(), grad.values().end(), 0.0); }
};

class Tape;
using NodeId = int32_t;

// Handle to a node on a tape.
struct Val {
  Tape* tape = nullptr;
  NodeId id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  bool requires_grad() const;
};

// Reverse-mode recording of primitive applications. Entries are appended in
// forward order; Backward replays them in exact reverse order. An entry is
// recorded only when at least one input requires a gradient.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Val Leaf(Tensor value, bool requires_grad = false);
  // Leaf backed by a parameter; HarvestParamGrads adds the node gradient
  // into the parameter after Backward.
  Val Bind(Param& p, bool requires_grad = true);

  const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
  Tensor& mutable_value(NodeId id) { return nodes_[static_cast<size_t>(id)].value; }
  bool requires_grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  // Gradient tensor for a node, allocated (zero) on first access.
  Tensor& grad(NodeId id);
  bool grad_allocated(NodeId id) const { return !nodes_[static_cast<size_t>(id)].grad.empty(); }
  // Gradient after Backward; zeros if the node was unreachable from the loss.
  Tensor GradOrZero(NodeId id) const;

  // Creates the output node and records a tape entry when needed.
  // `backward` may be empty for ops with no differentiable inputs.
  Val Emit(const char* op, const std::vector<NodeId>& inputs, Tensor out_value,
           BackwardFn backward);

  // Accumulates d(loss)/d(node) for every recorded node. `loss` must be
  // scalar-shaped. Clears previous gradients first, so repeated calls yield
  // identical results.
  void Backward(NodeId loss);

  void HarvestParamGrads();

  size_t node_count() const { return nodes_.size(); }
  size_t entry_count() const { return entries_.size(); }
  const std::string& op_name(size_t entry) const { return entries_[entry].op; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched
    bool requires_grad = false;
  };
  struct Entry {
    std::string op;
    std::vector<NodeId> inputs;
    NodeId output = -1;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  std::vector<Entry> entries_;
  std::vector<std::pair<Param*, NodeId>> bound_;
};

}  // namespace qtune

#endif  // QTUNE_TAPE_H_
