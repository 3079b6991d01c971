// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/tape.hpp"

#include <functional>
#include <string>
#include <vector>

namespace gdistill {

/// Builds a scalar loss on the given tape from the given parameters.
/// Must be deterministic: same parameters, same loss.
using LossBuilder = std::function<Value(Tape&, std::vector<Parameter>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    int64_t worst_coord = -1;
    double analytic = 0.0;
    double finite_diff = 0.0;
};

/// Central finite differences against the tape's analytic gradients,
/// coordinate by coordinate. Relative error uses max(|analytic|, |fd|, 1e-8)
/// as the denominator. eps must lie in [1e-7, 1e-3].
GradCheckReport grad_check(const LossBuilder& loss_fn, std::vector<Parameter>& params,
                           double eps);

} // namespace gdistill
