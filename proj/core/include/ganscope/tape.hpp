#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "ganscope/tensor.hpp"

namespace ganscope::ad {

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Per-input gradient buffers handed to a backward rule. An empty span means
/// the corresponding input does not need a gradient.
using GradSinks = std::span<const std::span<float>>;
using BackwardFn =
    std::function<void(const Tape& tape, std::span<const float> grad_out, GradSinks grad_in)>;

/// Define-by-run record of a forward computation.
///
/// Nodes are appended in execution order, so every input id precedes its
/// consumer and a reverse sweep is a valid topological traversal. A tape is
/// meant to be used by one thread and rebuilt for each forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is accumulated into `param.grad()` by backward().
  /// The tensor must outlive the tape.
  Var param(Tensor& param);
  /// Leaf that reads `value` in place and receives no gradient.
  Var constant_ref(const Tensor& value);
  /// Leaf owning a copy of `value`; receives no gradient.
  Var constant(Tensor value);

  /// Records an operation result. Called by the op implementations.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(Var v) const;
  const Tensor& value(std::size_t id) const;
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep from a single-element `loss`. Gradients of parameter
  /// leaves are added to (not overwritten in) their grad buffers.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* ref = nullptr;
    Tensor* param = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace ganscope::ad
