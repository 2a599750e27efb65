#include "awe/tape.hpp"

#include "awe/error.hpp"

namespace awe::nn {

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw NumericError("use of an unbound Var");
  tape_->check(*this);
  return tape_->value(id_);
}

void Tape::check(const Var& v) const {
  if (v.tape_ != this || v.generation_ != generation_ || v.id_ >= nodes_.size()) {
    throw NumericError("detached graph: node does not belong to the active tape");
  }
}

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::parameter(Tensor value) {
  require_finite(value, "parameter");
  nodes_.push_back(Node{std::move(value), {}, {}, grad_enabled_});
  parameters_.push_back(nodes_.size() - 1);
  return Var(this, nodes_.size() - 1, generation_);
}

Var Tape::record(Tensor value, std::span<const Var> parents, BackwardFn fn,
                 std::string_view op) {
  bool any_grad = false;
  for (const Var& p : parents) {
    check(p);
    any_grad = any_grad || nodes_[p.id_].requires_grad;
  }
  require_finite(value, op);
  Node node{std::move(value), {}, {}, grad_enabled_ && any_grad};
  if (node.requires_grad) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1, generation_);
}

Tensor& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    n.grad = Tensor(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
  }
  return n.grad;
}

std::vector<Tensor> Tape::backward(Var loss) {
  check(loss);
  if (!grad_enabled_) throw NumericError("backward on a tape with gradients disabled");
  const Tensor& lv = nodes_[loss.id_].value;
  if (lv.size() != 1) {
    throw NumericError("backward requires a scalar loss, got shape " + lv.shape_string());
  }
  if (nodes_[loss.id_].requires_grad) {
    grad(loss.id_)[0] = 1.0;
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
  }
  std::vector<Tensor> out;
  out.reserve(parameters_.size());
  for (std::size_t id : parameters_) {
    Node& n = nodes_[id];
    if (n.grad.empty()) {
      out.emplace_back(n.value.shape(), std::vector<double>(n.value.size(), 0.0));
    } else {
      require_finite(n.grad, "gradient");
      out.push_back(std::move(n.grad));
    }
  }
  clear();
  return out;
}

void Tape::clear() {
  nodes_.clear();
  parameters_.clear();
  ++generation_;
}

}  // namespace awe::nn
