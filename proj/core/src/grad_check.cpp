// SPDX-License-Identifier: Apache-2.0

#include "gdistill/grad_check.hpp"

#include "gdistill/error.hpp"

#include <cmath>

namespace gdistill {

namespace {

double eval_loss(const LossBuilder& loss_fn, std::vector<Parameter>& params) {
    Tape tape;
    Value loss = loss_fn(tape, params);
    return static_cast<double>(tape.value(loss).item());
}

} // namespace

GradCheckReport grad_check(const LossBuilder& loss_fn, std::vector<Parameter>& params,
                           double eps) {
    if (eps < 1e-7 || eps > 1e-3) {
        throw ConfigError("grad_check: eps must lie in [1e-7, 1e-3]");
    }

    // Analytic gradients once.
    std::vector<Tensor> analytic;
    {
        Tape tape;
        Value loss = loss_fn(tape, params);
        tape.backward(loss);
        analytic.reserve(params.size());
        for (const Parameter& p : params) analytic.push_back(tape.grad_for(p));
    }

    GradCheckReport report;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = params[pi];
        if (!p.requires_grad) continue;
        for (int64_t i = 0; i < p.tensor.size(); ++i) {
            real saved = p.tensor[i];
            p.tensor[i] = saved + static_cast<real>(eps);
            double up = eval_loss(loss_fn, params);
            p.tensor[i] = saved - static_cast<real>(eps);
            double down = eval_loss(loss_fn, params);
            p.tensor[i] = saved;
            double fd = (up - down) / (2.0 * eps);
            double a = static_cast<double>(analytic[pi][i]);
            double denom = std::max({std::fabs(a), std::fabs(fd), 1e-8});
            double rel = std::fabs(a - fd) / denom;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = p.id;
                report.worst_coord = i;
                report.analytic = a;
                report.finite_diff = fd;
            }
        }
    }
    return report;
}

} // namespace gdistill
