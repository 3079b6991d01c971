// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/adaboost.hpp"
#include "gdistill/config.hpp"
#include "gdistill/models.hpp"

#include <string>
#include <vector>

namespace gdistill {

struct TeacherCheckpoint {
    GCNTeacher model;
    TeacherConfig config;
    uint64_t seed = 0;
    int best_epoch = -1;
    double val_acc = 0.0;
    double test_acc = 0.0;
};

struct EnsembleCheckpoint {
    std::vector<MLPStudent> students;
    EnsembleWeights weights; // normalized alpha_bar, one per student
    DistillConfig config;
    std::string method; // adagmlp | glnn | bagging | ensemble | mlp_only
    uint64_t seed = 0;
    int best_epoch = -1;
    double val_acc = 0.0;
    double test_acc = 0.0;

    int ensemble_size() const { return static_cast<int>(students.size()); }
};

// Container: magic "GDCK", u32 version, u64 JSON metadata length + bytes,
// then raw little-endian 64-bit payloads in the order declared in the
// metadata. Round trips are bit-exact on parameters.

void save_checkpoint(const TeacherCheckpoint& ckpt, const std::string& path);
void save_checkpoint(const EnsembleCheckpoint& ckpt, const std::string& path);

/// "teacher" or "ensemble" (reads only the header).
std::string checkpoint_kind(const std::string& path);

TeacherCheckpoint load_teacher_checkpoint(const std::string& path);
EnsembleCheckpoint load_ensemble_checkpoint(const std::string& path);

} // namespace gdistill
