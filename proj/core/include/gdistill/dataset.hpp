// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/graph.hpp"
#include "gdistill/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gdistill {

/// Named node index sets. observed/unseen are present only for inductive
/// protocols (test must then be a subset of unseen).
struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    std::optional<std::vector<int>> observed;
    std::optional<std::vector<int>> unseen;

    bool empty() const { return train.empty() && val.empty() && test.empty(); }
    bool inductive() const { return observed.has_value() && unseen.has_value(); }
    void validate(int64_t n) const;
};

struct Dataset {
    Graph graph;
    Tensor features;         // [N x d]
    std::vector<int> labels; // class id per node, in [0, C)
    int num_classes = 0;
    Split split;

    int64_t num_nodes() const { return graph.n; }
    int64_t feature_dim() const { return features.cols(); }
    void validate() const;
};

// --- file formats ---------------------------------------------------------
// graph:    text, first line "nodes <N>", then one "src<TAB>dst" per line
// features: binary magic "GDFM", u32 version=1, u64 rows, u64 cols,
//           rows*cols little-endian f32; or CSV when the name ends in .csv
// labels:   CSV "node_id,class_id" (header line optional)
// split:    JSON {"train":[],"val":[],"test":[],"observed"?:[],"unseen"?:[]}

Graph load_graph_file(const std::string& path);
void save_graph_file(const Graph& g, const std::string& path);

Tensor load_features_file(const std::string& path);
void save_features_binary(const Tensor& features, const std::string& path);
void save_features_csv(const Tensor& features, const std::string& path);

std::vector<int> load_labels_file(const std::string& path, int64_t expected_nodes);
void save_labels_file(const std::vector<int>& labels, const std::string& path);

Split load_split_file(const std::string& path);
void save_split_file(const Split& split, const std::string& path);

/// Load and cross-validate all parts of a dataset. The class count is
/// inferred as max(label)+1 unless expected_classes pins it, in which case
/// any label outside [0, expected_classes) fails validation.
Dataset load_dataset(const std::string& graph_path, const std::string& features_path,
                     const std::string& labels_path,
                     const std::optional<std::string>& split_path = std::nullopt,
                     std::optional<int> expected_classes = std::nullopt);

/// Write graph/features/labels (and the split when non-empty) under
/// `<prefix>.graph`, `<prefix>.features`, `<prefix>.labels.csv`,
/// `<prefix>.split.json`.
struct DatasetPaths {
    std::string graph;
    std::string features;
    std::string labels;
    std::string split;
};
DatasetPaths dataset_paths(const std::string& prefix);
DatasetPaths save_dataset(const Dataset& ds, const std::string& prefix);

} // namespace gdistill
