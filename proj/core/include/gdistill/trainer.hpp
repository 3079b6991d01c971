// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/checkpoint.hpp"
#include "gdistill/dataset.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace gdistill {

/// Disjoint cover of the labeled set: subsets 1..K-1 hold floor(|L|/K)
/// nodes each, subset K the remainder. Subsets are sorted.
struct RCPartition {
    std::vector<std::vector<int>> subsets;

    int size() const { return static_cast<int>(subsets.size()); }
    void validate(const std::vector<int>& labeled) const;
};

RCPartition rc_partition(const std::vector<int>& labeled, int k, uint64_t seed);

/// Bootstrap draw (with replacement) of |labeled| node ids, sorted.
std::vector<int> bootstrap_sample(const std::vector<int>& labeled, uint64_t seed);

/// Zero exactly floor(rho * d) positions per row, chosen uniformly without
/// replacement, independently across rows. Fresh sample per call.
Tensor mask_features(const Tensor& x_rows, double rho, RandomStream& rng);

struct EpochRecord {
    int epoch = 0;
    std::vector<std::pair<std::string, double>> loss_terms;
    double val_acc = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    int best_epoch = -1;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
    double train_ms = 0.0;
    nlohmann::json config_echo;

    int epochs_run() const { return static_cast<int>(epochs.size()); }
    nlohmann::json to_json() const;
};

struct TeacherResult {
    TeacherCheckpoint checkpoint;
    TrainReport report;
};

/// Supervised full-batch teacher training with early stopping on validation
/// accuracy (best-epoch parameters restored). Inductive splits train on the
/// induced observed subgraph.
TeacherResult train_teacher(const Dataset& ds, const TeacherConfig& cfg, uint64_t seed);

enum class DistillMethod {
    adagmlp,  // boosted ensemble with RC / AdaKD / NA
    glnn,     // single student, plain distillation objective
    bagging,  // bootstrap-resampled ensemble, average combiner
    ensemble, // plain ensemble sharing the labeled set (average/vote eval)
    mlp_only, // supervised single MLP, no teacher term
};
DistillMethod distill_method_from_string(const std::string& s);
std::string to_string(DistillMethod m);

struct DistillResult {
    EnsembleCheckpoint checkpoint;
    TrainReport report;
};

/// Shared training engine for every student method. The teacher's logits are
/// computed once (dropout off) and frozen.
DistillResult distill(const Dataset& ds, const TeacherCheckpoint& teacher,
                      const DistillConfig& cfg, DistillMethod method);

DistillResult distill_adagmlp(const Dataset& ds, const TeacherCheckpoint& teacher,
                              const DistillConfig& cfg);
DistillResult distill_glnn(const Dataset& ds, const TeacherCheckpoint& teacher,
                           const DistillConfig& cfg);
DistillResult distill_bagging(const Dataset& ds, const TeacherCheckpoint& teacher,
                              const DistillConfig& cfg);

// --- evaluation helpers -----------------------------------------------------

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

/// Teacher logits over the full graph (dropout off).
Tensor teacher_logits_full(const Dataset& ds, const TeacherCheckpoint& teacher);

/// Per-student logits for arbitrary feature rows; no graph access anywhere
/// on this path.
std::vector<Tensor> ensemble_logits(const EnsembleCheckpoint& ckpt, const Tensor& feature_rows,
                                    int threads = 1);

/// Predicted classes for feature rows under the checkpoint's method-default
/// combiner (adaboost for adagmlp, average otherwise) or an explicit mode.
std::vector<int> ensemble_infer(const EnsembleCheckpoint& ckpt, const Tensor& feature_rows,
                                CombineMode mode, int threads = 1);
CombineMode default_combine_mode(const EnsembleCheckpoint& ckpt);

} // namespace gdistill
