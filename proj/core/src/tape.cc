// Copyright (c) the qtune authors. All rights reserved.
//
// Use of this source code is governed by a BSD-style
// license that can be found in the LICENSE file.

#include "qtune/tape.h"

#include <stdexcept>

namespace qtune {

const Tensor& Val::value() const { return tape->value(id); }
bool Val::requires_grad() const { return tape->requires_grad(id); }

Val Tape::Leaf(Tensor value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Val{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Val Tape::Bind(Param& p, bool requires_grad) {
  Val v = Leaf(p.value, requires_grad);
  if (requires_grad) bound_.emplace_back(&p, v.id);
  return v;
}

Tensor& Tape::grad(NodeId id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor(n.value.shape());
  return n.grad;
}

Tensor Tape::GradOrZero(NodeId id) const {
  const Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

Val Tape::Emit(const char* op, const std::vector<NodeId>& inputs, Tensor out_value,
               Tape::BackwardFn backward) {
  bool needs_grad = false;
  for (NodeId i : inputs) {
    if (requires_grad(i)) {
      needs_grad = true;
      break;
    }
  }
  Node n;
  n.value = std::move(out_value);
  n.requires_grad = needs_grad;
  nodes_.push_back(std::move(n));
  NodeId out = static_cast<NodeId>(nodes_.size() - 1);
  if (needs_grad && backward) {
    Entry e;
    e.op = op;
    e.inputs = inputs;
    e.output = out;
    e.backward = std::move(backward);
    entries_.push_back(std::move(e));
  }
  return Val{this, out};
}

void Tape::Backward(NodeId loss) {
  if (nodes_[static_cast<size_t>(loss)].value.size() != 1) {
    throw std::invalid_argument("Tape::Backward: loss must be scalar, got shape " +
                                nodes_[static_cast<size_t>(loss)].value.ShapeStr());
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad(loss)[0] = 1.0;
  for (size_t i = entries_.size(); i > 0; --i) {
    Entry& e = entries_[i - 1];
    // Nodes whose gradient was never touched cannot contribute.
    if (!grad_allocated(e.output)) continue;
    e.backward(*this);
  }
}

void Tape::HarvestParamGrads() {
  for (auto& [p, id] : bound_) {
    if (!grad_allocated(id)) continue;
    const Tensor& g = nodes_[static_cast<size_t>(id)].grad;
    double* dst = p->grad.data();
    const double* src = g.data();
    for (int64_t k = 0; k < g.size(); ++k) dst[k] += src[k];
  }
}

}  // namespace qtune
