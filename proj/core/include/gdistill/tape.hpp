// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/tensor.hpp"

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

namespace gdistill {

class Tape;

/// Trainable tensor with a stable identifier, unique within a model.
struct Parameter {
    std::string id;
    Tensor tensor;
    bool requires_grad = true;
};

/// Handle to a node on a tape. Cheap to copy; invalidated by Tape::reset().
struct Value {
    Tape* tape = nullptr;
    int id = -1;

    bool valid() const { return tape != nullptr && id >= 0; }
    const Tensor& tensor() const;
};

/// Dynamic compute tape. Records primitive ops in execution order; a
/// backward pass walks the record once in reverse and accumulates gradients.
/// Rebuilt for every forward pass; confined to one thread.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf that never receives gradients.
    Value constant(Tensor t) { return push(std::move(t), false, nullptr, ""); }

    /// Generic leaf; with requires_grad the gradient is readable via grad().
    Value input(Tensor t, bool requires_grad) {
        return push(std::move(t), requires_grad, nullptr, "");
    }

    /// Leaf tied to a Parameter. Re-registering the same id returns the
    /// existing node, so shared weights accumulate into one gradient.
    Value leaf(const Parameter& p);

    /// Record an op output. `backward` may be null when requires_grad is false.
    Value make_node(Tensor value, bool requires_grad, BackwardFn backward) {
        return push(std::move(value), requires_grad, std::move(backward), "");
    }

    const Tensor& value(Value v) const { return node(v).value; }
    bool requires_grad(Value v) const { return node(v).requires_grad; }
    int size() const { return static_cast<int>(nodes_.size()); }

    /// Reverse pass from a scalar loss. Visits each recorded op at most once,
    /// strictly in reverse recording order.
    void backward(Value loss);

    bool has_grad(Value v) const { return node(v).grad.size() > 0; }
    /// Gradient of the last backward() w.r.t. a node; zeros if unreached.
    Tensor grad(Value v) const;
    /// Gradient keyed by parameter id; zeros when the parameter never
    /// contributed to the loss (or was never placed on this tape).
    Tensor grad_for(const Parameter& p) const;

    /// Accumulation buffer for op backward closures; allocated on demand.
    Tensor& grad_buffer(int id);
    /// Whether a closure should bother accumulating into node `id`.
    bool wants_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

private:
    struct Node {
        Tensor value;
        Tensor grad; // empty until touched by backward
        bool requires_grad = false;
        BackwardFn backward;
        std::string param_id;
    };

    Value push(Tensor value, bool requires_grad, BackwardFn backward, std::string param_id);
    const Node& node(Value v) const;

    std::vector<Node> nodes_;
    std::unordered_map<std::string, int> param_nodes_;
};

} // namespace gdistill
