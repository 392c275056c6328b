#pragma once

#include <cstddef>
#include <functional>
#include <unordered_map>
#include <vector>

#include "rankgan/tensor.hpp"

namespace rankgan {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool needs_grad() const;
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradients keyed by parameter identity (the address of the parameter tensor).
class Gradients {
 public:
  const Tensor& of(const Tensor& param) const;
  bool contains(const Tensor& param) const { return grads_.count(&param) != 0; }
  std::size_t size() const { return grads_.size(); }
  // Euclidean norm over every gradient entry.
  double global_norm() const;
  void scale(double factor);
  bool all_finite() const;

  // Insertion order of parameters, for deterministic iteration.
  const std::vector<const Tensor*>& params() const { return order_; }

  Tensor& slot(const Tensor& param);

 private:
  std::unordered_map<const Tensor*, Tensor> grads_;
  std::vector<const Tensor*> order_;
};

// Reverse-mode record of tensor operations. Nodes are appended in evaluation
// order, so every node's inputs precede it and backward() is a reverse sweep.
// A tape is confined to one thread; independent tapes may run concurrently.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient.
  Var constant(Tensor value);
  // Leaf whose gradient is reported under `param` by backward(). The value is
  // copied; `param` must outlive the Gradients returned for it.
  Var parameter(const Tensor& param);

  // Sweeps from a scalar loss. Every registered parameter appears in the
  // result; parameters the loss does not depend on get an all-zero gradient.
  Gradients backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var record(Tensor value, std::vector<std::size_t> inputs, Backprop backprop);
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  // Gradient buffer of a node; only valid during backward() for nodes needing grad.
  std::vector<double>& grad(std::size_t id) { return nodes_[id].grad; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    Backprop backprop;
    std::vector<double> grad;
    const Tensor* param = nullptr;
    bool needs_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace rankgan
