// SPDX-License-Identifier: Apache-2.0

#include "gdistill/adaboost.hpp"

#include "gdistill/error.hpp"
#include "gdistill/ops.hpp"

#include <algorithm>
#include <cmath>

namespace gdistill {

NodeWeights NodeWeights::uniform(int64_t n) {
    if (n <= 0) throw ContractError("node weights need at least one node");
    NodeWeights nw;
    nw.w.assign(static_cast<size_t>(n), real(1) / static_cast<real>(n));
    return nw;
}

void NodeWeights::validate() const {
    real sum = real(0);
    for (real v : w) {
        if (v < real(0)) throw ContractError("node weight below zero");
        sum += v;
    }
    if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-9) {
        throw ContractError("node weights do not sum to 1");
    }
}

DivergenceVector divergence(const Tensor& teacher_logits, const Tensor& student_logits) {
    if (!teacher_logits.same_shape(student_logits)) {
        throw DimensionError("divergence: logit shapes differ");
    }
    int64_t n = teacher_logits.rows(), c = teacher_logits.cols();
    DivergenceVector d(static_cast<size_t>(n));
    for (int64_t r = 0; r < n; ++r) {
        // stable per-row log-softmax for both sides, temperature 1
        real tmax = teacher_logits.at(r, 0), smax = student_logits.at(r, 0);
        for (int64_t j = 1; j < c; ++j) {
            tmax = std::max(tmax, teacher_logits.at(r, j));
            smax = std::max(smax, student_logits.at(r, j));
        }
        real tsum = real(0), ssum = real(0);
        for (int64_t j = 0; j < c; ++j) {
            tsum += std::exp(teacher_logits.at(r, j) - tmax);
            ssum += std::exp(student_logits.at(r, j) - smax);
        }
        real tlse = std::log(tsum), slse = std::log(ssum);
        real kl = real(0);
        for (int64_t j = 0; j < c; ++j) {
            real logp = teacher_logits.at(r, j) - tmax - tlse;
            real logq = student_logits.at(r, j) - smax - slse;
            kl += std::exp(logp) * (logp - logq);
        }
        d[static_cast<size_t>(r)] = std::max(kl, real(0));
    }
    return d;
}

real weighted_error(const NodeWeights& w, const DivergenceVector& d, real beta) {
    if (!(beta > real(0))) throw ConfigError("beta must be positive");
    if (w.w.size() != d.size()) {
        throw DimensionError("weighted_error: weight/divergence lengths differ");
    }
    real num = real(0), den = real(0);
    for (size_t i = 0; i < d.size(); ++i) {
        num += w.w[i] * (real(1) - std::exp(-beta * d[i]));
        den += w.w[i];
    }
    if (den <= real(0)) throw ContractError("weighted_error: zero total weight");
    real e = num / den;
    return std::clamp(e, kErrorClamp, real(1) - kErrorClamp);
}

real combining_weight(real error) {
    if (error < kErrorClamp || error > real(1) - kErrorClamp) {
        throw ContractError("combining_weight: error outside the clamped range");
    }
    return std::max(std::log((real(1) - error) / error), kAlphaFloor);
}

NodeWeights update_weights(const NodeWeights& w, real alpha, const DivergenceVector& d,
                           real beta) {
    if (w.w.size() != d.size()) {
        throw DimensionError("update_weights: weight/divergence lengths differ");
    }
    NodeWeights out;
    out.w.resize(w.w.size());
    real sum = real(0);
    for (size_t i = 0; i < d.size(); ++i) {
        out.w[i] = w.w[i] * std::exp(alpha * (real(1) - std::exp(-beta * d[i])));
        sum += out.w[i];
    }
    if (sum <= real(0)) throw ContractError("update_weights: degenerate weight sum");
    for (real& v : out.w) v /= sum;
    return out;
}

LossValue adakd_loss(Tape& tape, const Tensor& teacher_logits,
                     const std::vector<Value>& per_student_logits, real tau,
                     const std::vector<NodeWeights>& stage_weights) {
    size_t k = per_student_logits.size();
    if (k == 0) throw ContractError("adakd_loss: empty ensemble");
    if (stage_weights.size() != k) {
        throw ContractError("adakd_loss: one node-weight vector per student required");
    }
    LossValue out;
    Value total;
    for (size_t i = 0; i < k; ++i) {
        LossValue kl = kl_loss(tape, teacher_logits, per_student_logits[i], tau,
                               &stage_weights[i].w);
        out.breakdown.emplace_back("kl_" + std::to_string(i), kl.value());
        total = i == 0 ? kl.node : add(total, kl.node);
    }
    out.node = scale(total, real(1) / static_cast<real>(k));
    out.breakdown.insert(out.breakdown.begin(),
                         {"adakd", static_cast<double>(tape.value(out.node).item())});
    return out;
}

EnsembleWeights normalize_alphas(const std::vector<real>& alphas) {
    if (alphas.empty()) throw ContractError("normalize_alphas: empty ensemble");
    real sum = real(0);
    for (real a : alphas) {
        if (a <= real(0)) throw ContractError("normalize_alphas: alpha must be positive");
        sum += a;
    }
    EnsembleWeights ew;
    ew.alpha_bar.reserve(alphas.size());
    for (real a : alphas) ew.alpha_bar.push_back(a / sum);
    return ew;
}

CombineMode combine_mode_from_string(const std::string& s) {
    if (s == "adaboost") return CombineMode::adaboost;
    if (s == "average") return CombineMode::average;
    if (s == "vote") return CombineMode::vote;
    throw ConfigError("unknown combine mode: " + s);
}

std::string to_string(CombineMode mode) {
    switch (mode) {
    case CombineMode::adaboost: return "adaboost";
    case CombineMode::average: return "average";
    case CombineMode::vote: return "vote";
    }
    return "?";
}

std::vector<int> ensemble_predict(const std::vector<Tensor>& per_student_logits,
                                  const EnsembleWeights* alpha_bar, CombineMode mode) {
    size_t k = per_student_logits.size();
    if (k == 0) throw ContractError("ensemble_predict: empty ensemble");
    int64_t n = per_student_logits[0].rows(), c = per_student_logits[0].cols();
    for (const Tensor& t : per_student_logits) {
        if (t.rows() != n || t.cols() != c) {
            throw DimensionError("ensemble_predict: logit shapes differ across students");
        }
    }
    if (mode == CombineMode::adaboost) {
        if (alpha_bar == nullptr || alpha_bar->alpha_bar.size() != k) {
            throw ContractError("ensemble_predict: adaboost mode needs one weight per student");
        }
    }

    if (mode == CombineMode::vote) {
        std::vector<std::vector<int>> votes;
        votes.reserve(k);
        for (const Tensor& t : per_student_logits) votes.push_back(row_argmax(t));
        std::vector<int> out(static_cast<size_t>(n));
        std::vector<int> counts(static_cast<size_t>(c));
        for (int64_t r = 0; r < n; ++r) {
            std::fill(counts.begin(), counts.end(), 0);
            for (size_t i = 0; i < k; ++i) ++counts[static_cast<size_t>(votes[i][static_cast<size_t>(r)])];
            int best = 0;
            for (int64_t j = 1; j < c; ++j) {
                if (counts[static_cast<size_t>(j)] > counts[static_cast<size_t>(best)]) {
                    best = static_cast<int>(j);
                }
            }
            out[static_cast<size_t>(r)] = best;
        }
        return out;
    }

    Tensor combined({n, c});
    for (size_t i = 0; i < k; ++i) {
        Tensor probs = row_softmax(per_student_logits[i], real(1));
        real coeff = mode == CombineMode::adaboost ? alpha_bar->alpha_bar[i]
                                                   : real(1) / static_cast<real>(k);
        for (int64_t j = 0; j < combined.size(); ++j) combined[j] += coeff * probs[j];
    }
    return row_argmax(combined);
}

} // namespace gdistill
