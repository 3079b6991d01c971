// SPDX-License-Identifier: Apache-2.0

#include "gdistill/optimizer.hpp"

#include "gdistill/error.hpp"

#include <cmath>

namespace gdistill {

void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               double weight_decay, double beta1, double beta2, double eps) {
    if (!param.same_shape(grad)) throw DimensionError("adam_step: grad shape mismatch");
    if (state.t == 0) {
        state.m = Tensor(param.shape());
        state.v = Tensor(param.shape());
    }
    if (!state.m.same_shape(param)) throw DimensionError("adam_step: state shape mismatch");
    state.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (int64_t i = 0; i < param.size(); ++i) {
        if (weight_decay != 0.0) {
            param[i] -= static_cast<real>(lr * weight_decay) * param[i];
        }
        double g = static_cast<double>(grad[i]);
        double m = beta1 * static_cast<double>(state.m[i]) + (1.0 - beta1) * g;
        double v = beta2 * static_cast<double>(state.v[i]) + (1.0 - beta2) * g * g;
        state.m[i] = static_cast<real>(m);
        state.v[i] = static_cast<real>(v);
        double update = lr * (m / bc1) / (std::sqrt(v / bc2) + eps);
        param[i] -= static_cast<real>(update);
    }
}

void Adam::step(const std::vector<Parameter*>& params, const Tape& tape) {
    for (Parameter* p : params) {
        if (!p->requires_grad) continue;
        Tensor grad = tape.grad_for(*p);
        adam_step(p->tensor, grad, state_[p->id], lr_, weight_decay_);
    }
}

} // namespace gdistill
