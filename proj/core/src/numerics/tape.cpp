#include "kgqa/numerics/tape.hpp"

#include <string>

#include "kgqa/error.hpp"

namespace kgqa::nn {

const Tensor& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NumericError("constant contains non-finite values");
  Node node;
  node.tag = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Parameter& p) {
  Node node;
  node.tag = "parameter";
  node.value = p.value;
  node.needs_grad = training();
  node.param = training() ? &p : nullptr;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* tag, std::vector<std::size_t> inputs, Tensor value, BackwardFn fn) {
  if (!value.all_finite()) {
    throw NumericError(std::string("non-finite result in '") + tag + "'");
  }
  Node node;
  node.tag = tag;
  node.value = std::move(value);
  if (training()) {
    for (auto in : inputs) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
    if (node.needs_grad) node.backward = std::move(fn);
  }
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_ref(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor(n.value.rows(), n.value.cols());
}

void Tape::backward(Var loss) {
  if (!training()) throw InvalidArgument("backward() on an inference tape");
  if (loss.value().size() != 1) {
    throw DimensionError("backward() needs a scalar loss, got " + shape_string(loss.value()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_ref(loss.id()).fill(1.0);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.needs_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param != nullptr) n.param->grad.accumulate(n.grad);
  }
}

}  // namespace kgqa::nn
