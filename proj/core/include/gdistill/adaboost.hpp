// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/objectives.hpp"
#include "gdistill/tensor.hpp"

#include <string>
#include <vector>

namespace gdistill {

/// Floor for the combining weight (keeps alpha strictly positive).
inline constexpr real kAlphaFloor = real(1e-8);
/// Symmetric clamp for the weighted error, keeping log((1-e)/e) finite.
inline constexpr real kErrorClamp = real(1e-3);

/// Boosting distribution over nodes: nonnegative, sums to 1.
struct NodeWeights {
    std::vector<real> w;

    static NodeWeights uniform(int64_t n);
    int64_t size() const { return static_cast<int64_t>(w.size()); }
    /// Throws ContractError unless on the simplex (sum within 1e-9 of 1).
    void validate() const;
};

/// Per-node nonnegative teacher/student divergence.
using DivergenceVector = std::vector<real>;

/// Clamped weighted error and the combining weight derived from it.
struct StudentStats {
    real error = real(0);
    real alpha = real(0);
};

/// Normalized per-student combining weights (sum 1, all > 0).
struct EnsembleWeights {
    std::vector<real> alpha_bar;
};

/// Per-node KL(softmax(teacher) || softmax(student)) at temperature 1.
DivergenceVector divergence(const Tensor& teacher_logits, const Tensor& student_logits);

/// e = sum_i w_i (1 - exp(-beta d_i)) / sum_i w_i, clamped into
/// [kErrorClamp, 1 - kErrorClamp]. beta must be positive.
real weighted_error(const NodeWeights& w, const DivergenceVector& d, real beta);

/// alpha = max(log((1 - e) / e), kAlphaFloor).
real combining_weight(real error);

/// w_i <- w_i * exp(alpha * (1 - exp(-beta d_i))), then renormalized.
NodeWeights update_weights(const NodeWeights& w, real alpha, const DivergenceVector& d,
                           real beta);

/// Mean over students of their stage-weighted KL terms; stage_weights[k] is
/// the node-weight vector in force when student k was reached.
LossValue adakd_loss(Tape& tape, const Tensor& teacher_logits,
                     const std::vector<Value>& per_student_logits, real tau,
                     const std::vector<NodeWeights>& stage_weights);

/// Normalize raw combining weights to the simplex.
EnsembleWeights normalize_alphas(const std::vector<real>& alphas);

enum class CombineMode { adaboost, average, vote };
CombineMode combine_mode_from_string(const std::string& s);
std::string to_string(CombineMode mode);

/// Combine per-student logits into predicted class ids. adaboost needs the
/// normalized alpha_bar; average/vote ignore it. Ties break to the lowest
/// class index in every mode.
std::vector<int> ensemble_predict(const std::vector<Tensor>& per_student_logits,
                                  const EnsembleWeights* alpha_bar, CombineMode mode);

} // namespace gdistill
