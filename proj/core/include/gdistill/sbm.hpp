// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/dataset.hpp"

#include <cstdint>

namespace gdistill {

/// Stochastic-block-model generator parameters. Features are the one-hot
/// centroid of the node's block (feature_dim >= classes) plus Gaussian noise.
struct SbmParams {
    int classes = 4;
    int nodes_per_class = 50;
    double p_in = 0.1;
    double p_out = 0.01;
    int feature_dim = 8;
    double feature_noise = 0.5;
    uint64_t seed = 1;
};

/// The preset used by tests and the `dataset synth --preset test` command.
SbmParams sbm_test_preset();

/// Block-model graph with block-id labels; split left empty.
Dataset generate_sbm(const SbmParams& params);

} // namespace gdistill
