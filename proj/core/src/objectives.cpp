// SPDX-License-Identifier: Apache-2.0

#include "gdistill/objectives.hpp"

#include "gdistill/error.hpp"

#include <cmath>
#include <string>

namespace gdistill {

void check_lambda(real lambda, const char* name, bool sweep_mode) {
    bool ok = sweep_mode ? (lambda >= real(0) && lambda <= real(1))
                         : (lambda > real(0) && lambda < real(1));
    if (!ok) {
        throw ConfigError(std::string(name) + " must lie in " +
                          (sweep_mode ? "[0, 1]" : "(0, 1)"));
    }
}

void check_tau(real tau) {
    if (!(tau > real(0) && tau <= real(1))) {
        throw ConfigError("tau must lie in (0, 1]");
    }
}

LossValue ce_loss(Tape& tape, Value logits, const std::vector<int>& labels) {
    const Tensor& z = tape.value(logits);
    if (z.rows() == 0) throw ContractError("ce_loss: empty input");
    if (static_cast<int64_t>(labels.size()) != z.rows()) {
        throw DimensionError("ce_loss: one label per row required");
    }
    Value logp = log_row_softmax(logits, real(1));
    Value picked = gather_cols(logp, labels);
    Value loss = scale(mean_all(picked), real(-1));
    return LossValue{loss, {{"ce", static_cast<double>(tape.value(loss).item())}}};
}

namespace {

/// Stable softmax and log-softmax of a constant matrix at temperature tau.
void teacher_distributions(const Tensor& logits, real tau, Tensor& probs, Tensor& log_probs) {
    int64_t n = logits.rows(), c = logits.cols();
    probs = Tensor({n, c});
    log_probs = Tensor({n, c});
    for (int64_t r = 0; r < n; ++r) {
        real mx = logits.at(r, 0) / tau;
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(r, j) / tau);
        real sum = real(0);
        for (int64_t j = 0; j < c; ++j) sum += std::exp(logits.at(r, j) / tau - mx);
        real lse = std::log(sum);
        for (int64_t j = 0; j < c; ++j) {
            real lp = logits.at(r, j) / tau - mx - lse;
            log_probs.at(r, j) = lp;
            probs.at(r, j) = std::exp(lp);
        }
    }
}

} // namespace

LossValue kl_loss(Tape& tape, const Tensor& teacher_logits, Value student_logits, real tau,
                  const std::vector<real>* node_weights) {
    check_tau(tau);
    const Tensor& s = tape.value(student_logits);
    if (!teacher_logits.same_shape(s)) {
        throw DimensionError("kl_loss: teacher and student logits differ in shape");
    }
    int64_t n = s.rows();
    std::vector<real> weights;
    if (node_weights != nullptr) {
        if (static_cast<int64_t>(node_weights->size()) != n) {
            throw DimensionError("kl_loss: one node weight per row required");
        }
        for (real w : *node_weights) {
            if (w < real(0)) throw ConfigError("kl_loss: node weights must be nonnegative");
        }
        weights = *node_weights;
    } else {
        weights.assign(static_cast<size_t>(n), real(1) / static_cast<real>(n));
    }

    Tensor probs, log_probs;
    teacher_distributions(teacher_logits, tau, probs, log_probs);
    Value p = tape.constant(std::move(probs));
    Value logp = tape.constant(std::move(log_probs));
    Value logq = log_row_softmax(student_logits, tau);
    Value per_node = row_sum(mul(p, sub(logp, logq))); // [n x 1]
    Value w = tape.constant(Tensor({n, 1}, std::move(weights)));
    Value loss = sum_all(mul(w, per_node));
    return LossValue{loss, {{"kl", static_cast<double>(tape.value(loss).item())}}};
}

LossValue g2m_loss(Tape& tape, Value student_logits_all, const std::vector<int>& labeled_idx,
                   const std::vector<int>& labels_full, const Tensor& teacher_logits_all,
                   real tau, real lambda, bool sweep_mode) {
    check_lambda(lambda, "lambda", sweep_mode);
    std::vector<int> labels_sub;
    labels_sub.reserve(labeled_idx.size());
    for (int i : labeled_idx) labels_sub.push_back(labels_full[static_cast<size_t>(i)]);
    LossValue ce = ce_loss(tape, gather_rows(student_logits_all, labeled_idx), labels_sub);
    LossValue kl = kl_loss(tape, teacher_logits_all, student_logits_all, tau);
    Value loss = axpby(lambda, ce.node, real(1) - lambda, kl.node);
    return LossValue{loss,
                     {{"g2m", static_cast<double>(tape.value(loss).item())},
                      {"ce", ce.value()},
                      {"kl", kl.value()}}};
}

LossValue rc_loss(Tape& tape, const std::vector<Value>& per_student_logits,
                  const std::vector<std::vector<int>>& per_student_labels) {
    size_t k = per_student_logits.size();
    if (k == 0 || per_student_labels.size() != k) {
        throw ContractError("rc_loss: one label set per student required");
    }
    LossValue out;
    Value total;
    for (size_t i = 0; i < k; ++i) {
        if (per_student_labels[i].empty()) {
            throw ContractError("rc_loss: empty labeled subset for student " + std::to_string(i));
        }
        LossValue ce = ce_loss(tape, per_student_logits[i], per_student_labels[i]);
        out.breakdown.emplace_back("ce_" + std::to_string(i), ce.value());
        total = i == 0 ? ce.node : add(total, ce.node);
    }
    out.node = scale(total, real(1) / static_cast<real>(k));
    out.breakdown.insert(out.breakdown.begin(),
                         {"rc", static_cast<double>(tape.value(out.node).item())});
    return out;
}

namespace {

/// sum of squared entries, as a scalar node
Value sum_sq_diff(Value a, Value b) { return sum_all(square(sub(a, b))); }

} // namespace

LossValue na_output_loss(Tape& tape, const std::vector<Value>& clean_logits,
                         const std::vector<Value>& masked_logits) {
    size_t k = clean_logits.size();
    if (k == 0 || masked_logits.size() != k) {
        throw ContractError("na_output_loss: clean/masked student counts differ");
    }
    Value total;
    for (size_t i = 0; i < k; ++i) {
        int64_t rows = tape.value(clean_logits[i]).rows();
        if (rows == 0) throw ContractError("na_output_loss: empty subset");
        Value term = scale(sum_sq_diff(clean_logits[i], masked_logits[i]),
                           real(1) / static_cast<real>(rows));
        total = i == 0 ? term : add(total, term);
    }
    Value loss = scale(total, real(1) / static_cast<real>(k));
    return LossValue{loss, {{"na_o", static_cast<double>(tape.value(loss).item())}}};
}

LossValue na_hidden_loss(Tape& tape, const std::vector<std::vector<Value>>& clean_hidden,
                         const std::vector<std::vector<Value>>& masked_hidden) {
    size_t k = clean_hidden.size();
    if (k == 0 || masked_hidden.size() != k) {
        throw ContractError("na_hidden_loss: clean/masked student counts differ");
    }
    Value total;
    for (size_t i = 0; i < k; ++i) {
        size_t layers = clean_hidden[i].size();
        if (layers == 0 || masked_hidden[i].size() != layers) {
            throw ContractError("na_hidden_loss: trace length mismatch for student " +
                                std::to_string(i));
        }
        int64_t rows = tape.value(clean_hidden[i][0]).rows();
        if (rows == 0) throw ContractError("na_hidden_loss: empty subset");
        Value layer_sum;
        for (size_t l = 0; l < layers; ++l) {
            Value d = sum_sq_diff(clean_hidden[i][l], masked_hidden[i][l]);
            layer_sum = l == 0 ? d : add(layer_sum, d);
        }
        Value term = scale(layer_sum, real(1) / (static_cast<real>(rows) * static_cast<real>(layers)));
        total = i == 0 ? term : add(total, term);
    }
    Value loss = scale(total, real(1) / static_cast<real>(k));
    return LossValue{loss, {{"na_h", static_cast<double>(tape.value(loss).item())}}};
}

LossValue na_loss(Tape& tape, const LossValue* na_o, const LossValue* na_h, real lambda_na,
                  bool sweep_mode) {
    check_lambda(lambda_na, "lambda_na", sweep_mode);
    Value zero;
    auto term = [&](const LossValue* lv) {
        if (lv != nullptr) return lv->node;
        if (!zero.valid()) zero = tape.constant(Tensor::scalar(real(0)));
        return zero;
    };
    Value loss = axpby(lambda_na, term(na_o), real(1) - lambda_na, term(na_h));
    return LossValue{loss,
                     {{"na", static_cast<double>(tape.value(loss).item())},
                      {"na_o", na_o ? na_o->value() : 0.0},
                      {"na_h", na_h ? na_h->value() : 0.0}}};
}

LossValue adagmlp_loss(Tape& tape, const LossValue& rc, const LossValue& adakd,
                       const LossValue* na, real lambda, bool sweep_mode) {
    check_lambda(lambda, "lambda", sweep_mode);
    Value loss = axpby(lambda, rc.node, real(1) - lambda, adakd.node);
    if (na != nullptr) loss = add(loss, na->node);
    LossValue out;
    out.node = loss;
    out.breakdown = {{"total", static_cast<double>(tape.value(loss).item())},
                     {"rc", rc.value()},
                     {"adakd", adakd.value()},
                     {"na", na ? na->value() : 0.0}};
    return out;
}

} // namespace gdistill
