// SPDX-License-Identifier: Apache-2.0

#include "gdistill/tape.hpp"

#include "gdistill/error.hpp"

namespace gdistill {

const Tensor& Value::tensor() const {
    if (!valid()) throw ContractError("dereferencing an invalid Value");
    return tape->value(*this);
}

Value Tape::push(Tensor value, bool requires_grad, BackwardFn backward, std::string param_id) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.backward = std::move(backward);
    n.param_id = std::move(param_id);
    nodes_.push_back(std::move(n));
    return Value{this, static_cast<int>(nodes_.size()) - 1};
}

Value Tape::leaf(const Parameter& p) {
    auto it = param_nodes_.find(p.id);
    if (it != param_nodes_.end()) return Value{this, it->second};
    Value v = push(p.tensor, p.requires_grad, nullptr, p.id);
    param_nodes_.emplace(p.id, v.id);
    return v;
}

const Tape::Node& Tape::node(Value v) const {
    if (v.tape != this || v.id < 0 || v.id >= size()) {
        throw ContractError("Value does not belong to this tape");
    }
    return nodes_[static_cast<size_t>(v.id)];
}

Tensor& Tape::grad_buffer(int id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
}

void Tape::backward(Value loss) {
    const Node& ln = node(loss);
    if (!ln.value.is_scalar()) {
        throw ContractError("backward: loss must be a scalar node");
    }
    grad_buffer(loss.id)[0] += real(1);
    for (int i = loss.id; i >= 0; --i) {
        Node& n = nodes_[static_cast<size_t>(i)];
        if (n.grad.size() == 0 || !n.backward) continue;
        n.backward(*this, n.grad);
    }
}

Tensor Tape::grad(Value v) const {
    const Node& n = node(v);
    if (n.grad.size() == 0) return Tensor(n.value.shape());
    return n.grad;
}

Tensor Tape::grad_for(const Parameter& p) const {
    auto it = param_nodes_.find(p.id);
    if (it == param_nodes_.end()) return Tensor(p.tensor.shape());
    return grad(Value{const_cast<Tape*>(this), it->second});
}

} // namespace gdistill
