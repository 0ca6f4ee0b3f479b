#include "ganscope/tape.hpp"

#include <stdexcept>

namespace ganscope::ad {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::param(Tensor& param) {
  Node n;
  n.ref = &param;
  n.param = &param;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node n;
  n.owned = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  Node n;
  n.owned = std::move(value);
  for (std::size_t id : inputs) {
    if (id >= nodes_.size()) throw std::logic_error("tape input id out of order");
    n.requires_grad = n.requires_grad || nodes_[id].requires_grad;
  }
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Tape::value(std::size_t id) const {
  const Node& n = nodes_.at(id);
  return n.ref ? *n.ref : n.owned;
}

const Tensor& Tape::value(Var v) const {
  if (v.tape != this) throw std::logic_error("variable belongs to a different tape");
  return value(v.id);
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::logic_error("variable belongs to a different tape");
  const Tensor& lv = value(loss);
  if (lv.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + to_string(lv.shape()));
  }
  std::vector<std::vector<float>> grads(loss.id + 1);
  grads[loss.id].assign(1, 1.0f);

  std::vector<std::span<float>> sinks;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (grads[i].empty() || !n.requires_grad) continue;
    if (n.param) {
      n.param->ensure_grad();
      auto pg = n.param->grad();
      for (std::size_t k = 0; k < pg.size(); ++k) pg[k] += grads[i][k];
      continue;
    }
    if (!n.backward) continue;
    sinks.clear();
    for (std::size_t in : n.inputs) {
      if (!nodes_[in].requires_grad) {
        sinks.emplace_back();
        continue;
      }
      if (grads[in].empty()) grads[in].assign(value(in).size(), 0.0f);
      sinks.emplace_back(grads[in]);
    }
    n.backward(*this, grads[i], sinks);
    grads[i].clear();
    grads[i].shrink_to_fit();
  }
}

}  // namespace ganscope::ad
