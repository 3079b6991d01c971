// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/tensor.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace gdistill {

/// Teacher training knobs (GCN conventions as defaults).
struct TeacherConfig {
    int hidden = 64;
    int layers = 2;
    double dropout = 0.5;
    double lr = 0.01;
    double weight_decay = 5e-4;
    int max_epochs = 500;
    int patience = 50;

    void validate() const;
    nlohmann::json to_json() const;
    static TeacherConfig from_json(const nlohmann::json& j);
};

/// Every distillation hyper-parameter, including the ablation switches.
struct DistillConfig {
    double lambda = 0.5;    // RC vs AdaKD balance
    double lambda_na = 0.5; // NA-O vs NA-H balance
    double beta = 3.0;      // divergence sensitivity
    double tau = 1.0;       // distillation temperature, (0, 1]
    double rho = 0.1;       // feature masking fraction, [0, 1)
    int k = 2;              // ensemble size
    int layers = 2;         // student depth (>= 2)
    int hidden = 64;
    double dropout = 0.5;
    double lr = 0.01;
    double weight_decay = 5e-4;
    int max_epochs = 500;
    int patience = 50;
    uint64_t seed = 1;

    bool rc_enabled = true;
    bool adakd_enabled = true;
    bool na_enabled = true;
    bool na_o_enabled = true;
    bool na_h_enabled = true;

    /// Allows lambda/lambda_na at the closed boundaries 0 and 1.
    bool sweep_mode = false;
    /// Redraw the RC partition every epoch (sensitivity study; default one
    /// draw per run).
    bool rc_resample_per_epoch = false;
    /// Reuse the clean forward's dropout sample for the masked NA forward.
    /// With independent samples the alignment terms mostly measure dropout
    /// noise and can collapse the students; off only for sensitivity runs.
    bool na_shared_dropout = true;

    void validate() const;
    nlohmann::json to_json() const;
    static DistillConfig from_json(const nlohmann::json& j);
    /// Apply any keys present in j on top of the current values.
    void merge_json(const nlohmann::json& j);
};

} // namespace gdistill
