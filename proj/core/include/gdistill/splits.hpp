// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/dataset.hpp"

#include <cstdint>
#include <vector>

namespace gdistill {

/// Class-balanced train set (per_class_train nodes per class), then val and
/// test sampled from the remainder. Deterministic under seed.
Split make_transductive_split(const std::vector<int>& labels, int num_classes,
                              int per_class_train, int val_size, int test_size, uint64_t seed);

/// |train| = round(rate * N) sampled uniformly (no class stratification);
/// val_size nodes from the remainder, the rest is test.
Split make_label_rate_split(const std::vector<int>& labels, double rate, int val_size,
                            uint64_t seed);

/// Holds out round(unseen_fraction * N) nodes entirely; train/val are drawn
/// from the observed part with the transductive convention; test = unseen.
Split make_inductive_split(const std::vector<int>& labels, int num_classes,
                           double unseen_fraction, int per_class_train, int val_size,
                           uint64_t seed);

} // namespace gdistill
