// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/tape.hpp"
#include "gdistill/tensor.hpp"

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace gdistill {

struct AdamState {
    Tensor m; // first moment
    Tensor v; // second moment
    int64_t t = 0;
};

/// One Adam update for a single tensor. Decoupled weight decay is applied as
/// theta <- theta - lr * wd * theta before the moment update; bias-corrected
/// moments follow, with eps added after the square root.
void adam_step(Tensor& param, const Tensor& grad, AdamState& state, double lr,
               double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

/// Adam over a set of named parameters; state is keyed by parameter id.
class Adam {
public:
    Adam(double lr, double weight_decay) : lr_(lr), weight_decay_(weight_decay) {}

    /// Pulls each parameter's gradient from the tape (zeros when unreached)
    /// and applies adam_step.
    void step(const std::vector<Parameter*>& params, const Tape& tape);

private:
    double lr_;
    double weight_decay_;
    std::unordered_map<std::string, AdamState> state_;
};

} // namespace gdistill
