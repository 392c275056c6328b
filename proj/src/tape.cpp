#include "rankgan/tape.hpp"

#include <cmath>

#include "rankgan/error.hpp"

namespace rankgan {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw UsageError("use of an unbound Var");
  return tape_->value(id_);
}

bool Var::needs_grad() const { return tape_ != nullptr && tape_->needs_grad(id_); }

const Tensor& Gradients::of(const Tensor& param) const {
  auto it = grads_.find(&param);
  if (it == grads_.end()) {
    throw UsageError("no gradient recorded for parameter of shape " +
                     shape_string(param.shape()));
  }
  return it->second;
}

Tensor& Gradients::slot(const Tensor& param) {
  auto [it, inserted] = grads_.try_emplace(&param, param.shape(), 0.0);
  if (inserted) order_.push_back(&param);
  return it->second;
}

double Gradients::global_norm() const {
  double sq = 0.0;
  for (const Tensor* p : order_) {
    for (double g : grads_.at(p).data()) sq += g * g;
  }
  return std::sqrt(sq);
}

void Gradients::scale(double factor) {
  for (const Tensor* p : order_) {
    for (double& g : grads_.at(p).data()) g *= factor;
  }
}

bool Gradients::all_finite() const {
  for (const Tensor* p : order_) {
    if (!grads_.at(p).is_finite()) return false;
  }
  return true;
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const Tensor& param) {
  Node node;
  node.value = param;
  node.param = &param;
  node.needs_grad = true;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop) {
  Node node;
  node.value = std::move(value);
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw UsageError("op input not recorded on this tape");
    node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  }
  if (node.needs_grad) {
    node.inputs = std::move(inputs);
    node.backprop = std::move(backprop);
  }
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Gradients Tape::backward(Var loss) {
  if (loss.tape() != this) throw UsageError("loss is not on this tape");
  if (loss.value().size() != 1) {
    throw UsageError("backward needs a scalar loss, got shape " +
                     shape_string(loss.shape()));
  }
  Gradients out;
  for (const Node& n : nodes_) {
    if (n.param != nullptr) out.slot(*n.param);
  }
  for (Node& n : nodes_) {
    if (n.needs_grad) n.grad.assign(n.value.size(), 0.0);
  }
  if (!nodes_[loss.id()].needs_grad) return out;

  nodes_[loss.id()].grad[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad) continue;
    if (n.backprop) n.backprop(*this, id);
    if (n.param != nullptr) {
      Tensor& g = out.slot(*n.param);
      for (std::size_t i = 0; i < n.grad.size(); ++i) g[i] += n.grad[i];
    }
  }
  for (Node& n : nodes_) {
    n.grad.clear();
    n.grad.shrink_to_fit();
  }
  return out;
}

}  // namespace rankgan
