// SPDX-License-Identifier: Apache-2.0

#include "gdistill/config.hpp"

#include "gdistill/error.hpp"
#include "gdistill/objectives.hpp"

namespace gdistill {

using nlohmann::json;

void TeacherConfig::validate() const {
    if (hidden <= 0 || layers < 1) throw ConfigError("teacher: invalid architecture");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("teacher: dropout must lie in [0, 1)");
    if (lr <= 0.0) throw ConfigError("teacher: lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("teacher: weight decay must be >= 0");
    if (max_epochs < 0 || patience < 0) throw ConfigError("teacher: negative epoch budget");
}

json TeacherConfig::to_json() const {
    return json{{"hidden", hidden},         {"layers", layers},
                {"dropout", dropout},       {"lr", lr},
                {"weight_decay", weight_decay}, {"max_epochs", max_epochs},
                {"patience", patience}};
}

TeacherConfig TeacherConfig::from_json(const json& j) {
    TeacherConfig c;
    c.hidden = j.value("hidden", c.hidden);
    c.layers = j.value("layers", c.layers);
    c.dropout = j.value("dropout", c.dropout);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.validate();
    return c;
}

void DistillConfig::validate() const {
    check_lambda(static_cast<real>(lambda), "lambda", sweep_mode);
    check_lambda(static_cast<real>(lambda_na), "lambda_na", sweep_mode);
    if (!(beta > 0.0)) throw ConfigError("beta must be positive");
    check_tau(static_cast<real>(tau));
    if (rho < 0.0 || rho >= 1.0) throw ConfigError("rho must lie in [0, 1)");
    if (k < 1) throw ConfigError("ensemble size k must be >= 1");
    if (layers < 2) throw ConfigError("student layers must be >= 2");
    if (hidden <= 0) throw ConfigError("hidden width must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (max_epochs < 0 || patience < 0) throw ConfigError("negative epoch budget");
    if (na_enabled != (na_o_enabled || na_h_enabled)) {
        throw ConfigError("na_enabled must equal (na_o_enabled or na_h_enabled)");
    }
}

json DistillConfig::to_json() const {
    return json{{"lambda", lambda},
                {"lambda_na", lambda_na},
                {"beta", beta},
                {"tau", tau},
                {"rho", rho},
                {"k", k},
                {"layers", layers},
                {"hidden", hidden},
                {"dropout", dropout},
                {"lr", lr},
                {"weight_decay", weight_decay},
                {"max_epochs", max_epochs},
                {"patience", patience},
                {"seed", seed},
                {"rc_enabled", rc_enabled},
                {"adakd_enabled", adakd_enabled},
                {"na_enabled", na_enabled},
                {"na_o_enabled", na_o_enabled},
                {"na_h_enabled", na_h_enabled},
                {"sweep_mode", sweep_mode},
                {"rc_resample_per_epoch", rc_resample_per_epoch},
                {"na_shared_dropout", na_shared_dropout}};
}

void DistillConfig::merge_json(const json& j) {
    lambda = j.value("lambda", lambda);
    lambda_na = j.value("lambda_na", lambda_na);
    beta = j.value("beta", beta);
    tau = j.value("tau", tau);
    rho = j.value("rho", rho);
    k = j.value("k", k);
    layers = j.value("layers", layers);
    hidden = j.value("hidden", hidden);
    dropout = j.value("dropout", dropout);
    lr = j.value("lr", lr);
    weight_decay = j.value("weight_decay", weight_decay);
    max_epochs = j.value("max_epochs", max_epochs);
    patience = j.value("patience", patience);
    seed = j.value("seed", seed);
    rc_enabled = j.value("rc_enabled", rc_enabled);
    adakd_enabled = j.value("adakd_enabled", adakd_enabled);
    na_enabled = j.value("na_enabled", na_enabled);
    na_o_enabled = j.value("na_o_enabled", na_o_enabled);
    na_h_enabled = j.value("na_h_enabled", na_h_enabled);
    sweep_mode = j.value("sweep_mode", sweep_mode);
    rc_resample_per_epoch = j.value("rc_resample_per_epoch", rc_resample_per_epoch);
    na_shared_dropout = j.value("na_shared_dropout", na_shared_dropout);
}

DistillConfig DistillConfig::from_json(const json& j) {
    DistillConfig c;
    c.merge_json(j);
    c.validate();
    return c;
}

} // namespace gdistill
