// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/ops.hpp"
#include "gdistill/tape.hpp"

#include <string>
#include <utility>
#include <vector>

namespace gdistill {

/// A scalar loss node plus a per-term numeric breakdown for reporting.
struct LossValue {
    Value node;
    std::vector<std::pair<std::string, double>> breakdown;

    double value() const { return static_cast<double>(node.tensor().item()); }
};

/// Mean over rows of -log softmax(logits)[label].
LossValue ce_loss(Tape& tape, Value logits, const std::vector<int>& labels);

/// Weighted sum of per-node KL(softmax(teacher/tau) || softmax(student/tau)).
/// Weights default to uniform 1/rows; when supplied they are used as-is (no
/// extra normalization). The teacher side is a constant: no gradient flows
/// to it. tau must lie in (0, 1].
LossValue kl_loss(Tape& tape, const Tensor& teacher_logits, Value student_logits, real tau,
                  const std::vector<real>* node_weights = nullptr);

/// Single-student distillation objective: lambda * CE(labeled rows)
/// + (1 - lambda) * KL over all rows with uniform weights.
LossValue g2m_loss(Tape& tape, Value student_logits_all, const std::vector<int>& labeled_idx,
                   const std::vector<int>& labels_full, const Tensor& teacher_logits_all,
                   real tau, real lambda, bool sweep_mode = false);

/// Mean over students of each student's CE on its own labeled subset.
LossValue rc_loss(Tape& tape, const std::vector<Value>& per_student_logits,
                  const std::vector<std::vector<int>>& per_student_labels);

/// Mean over students of mean-per-node squared L2 between clean and masked
/// logits (raw logits, pre-softmax).
LossValue na_output_loss(Tape& tape, const std::vector<Value>& clean_logits,
                         const std::vector<Value>& masked_logits);

/// Same for the post-activation hidden layers, additionally averaged over
/// the L-1 hidden layers.
LossValue na_hidden_loss(Tape& tape, const std::vector<std::vector<Value>>& clean_hidden,
                         const std::vector<std::vector<Value>>& masked_hidden);

/// lambda_na * NA-O + (1 - lambda_na) * NA-H; a disabled side contributes 0.
LossValue na_loss(Tape& tape, const LossValue* na_o, const LossValue* na_h, real lambda_na,
                  bool sweep_mode = false);

/// lambda * RC + (1 - lambda) * AdaKD + NA (NA omitted when absent).
LossValue adagmlp_loss(Tape& tape, const LossValue& rc, const LossValue& adakd,
                       const LossValue* na, real lambda, bool sweep_mode = false);

/// Range guards shared with the config validator. In sweep mode the closed
/// interval [0, 1] is allowed for the balance weights.
void check_lambda(real lambda, const char* name, bool sweep_mode);
void check_tau(real tau);

} // namespace gdistill
