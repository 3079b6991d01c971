// SPDX-License-Identifier: Apache-2.0

#include "gdistill/sbm.hpp"

#include "gdistill/error.hpp"
#include "gdistill/random.hpp"

namespace gdistill {

SbmParams sbm_test_preset() { return SbmParams{}; }

Dataset generate_sbm(const SbmParams& p) {
    if (p.classes <= 0 || p.nodes_per_class <= 0) {
        throw ConfigError("sbm: classes and nodes_per_class must be positive");
    }
    if (!(p.p_out >= 0.0 && p.p_out < p.p_in && p.p_in <= 1.0) &&
        !(p.p_in == p.p_out && p.p_in >= 0.0 && p.p_in <= 1.0)) {
        throw ConfigError("sbm: need 0 <= p_out < p_in <= 1");
    }
    if (p.feature_dim < p.classes) {
        throw ConfigError("sbm: feature_dim must be >= classes for one-hot centroids");
    }
    if (p.feature_noise < 0.0) throw ConfigError("sbm: feature_noise must be >= 0");

    int64_t n = static_cast<int64_t>(p.classes) * p.nodes_per_class;
    std::vector<int> labels(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        labels[static_cast<size_t>(i)] = static_cast<int>(i / p.nodes_per_class);
    }

    RandomStream edge_rng(derive_seed(p.seed, "sbm.edges"));
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
            double prob = labels[static_cast<size_t>(i)] == labels[static_cast<size_t>(j)]
                              ? p.p_in
                              : p.p_out;
            if (prob >= 1.0 || edge_rng.bernoulli(prob)) edges.emplace_back(i, j);
        }
    }

    RandomStream feat_rng(derive_seed(p.seed, "sbm.features"));
    Tensor features({n, static_cast<int64_t>(p.feature_dim)});
    for (int64_t i = 0; i < n; ++i) {
        features.at(i, labels[static_cast<size_t>(i)]) = real(1);
        if (p.feature_noise > 0.0) {
            for (int64_t d = 0; d < p.feature_dim; ++d) {
                features.at(i, d) += static_cast<real>(p.feature_noise * feat_rng.normal());
            }
        }
    }

    Dataset ds;
    ds.graph = Graph::from_edges(n, edges);
    ds.features = std::move(features);
    ds.labels = std::move(labels);
    ds.num_classes = p.classes;
    return ds;
}

} // namespace gdistill
