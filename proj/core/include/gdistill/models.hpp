// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/graph.hpp"
#include "gdistill/ops.hpp"
#include "gdistill/random.hpp"
#include "gdistill/tape.hpp"

#include <string>
#include <vector>

namespace gdistill {

/// Glorot-uniform weight matrix, deterministic under seed.
Tensor glorot_uniform(int64_t fan_in, int64_t fan_out, RandomStream& rng);

/// Parameters for a stack of linear layers (weights plus optional biases),
/// Glorot weights and zero biases. Ids are "<prefix>.w<l>" / "<prefix>.b<l>".
std::vector<Parameter> init_params(const std::string& prefix, const std::vector<int64_t>& widths,
                                   bool with_biases, uint64_t seed);

/// Graph-convolutional teacher: L layers, no biases, ReLU between layers,
/// dropout on every layer input while training.
struct GCNTeacher {
    std::vector<Parameter> weights;
    real dropout = real(0.5);

    static GCNTeacher create(int64_t in_dim, int64_t hidden, int64_t out_dim, int layers,
                             real dropout, uint64_t seed);

    int layers() const { return static_cast<int>(weights.size()); }
    int64_t in_dim() const { return weights.front().tensor.rows(); }
    int64_t out_dim() const { return weights.back().tensor.cols(); }
    std::vector<Parameter*> params();
};

/// Feed-forward student (features only, no graph access). L >= 2 layers with
/// biases, ReLU between layers, dropout on layer inputs while training.
struct MLPStudent {
    std::vector<Parameter> weights;
    std::vector<Parameter> biases;
    real dropout = real(0.5);

    static MLPStudent create(const std::string& prefix, int64_t in_dim, int64_t hidden,
                             int64_t out_dim, int layers, real dropout, uint64_t seed);

    int layers() const { return static_cast<int>(weights.size()); }
    int64_t in_dim() const { return weights.front().tensor.rows(); }
    int64_t out_dim() const { return weights.back().tensor.cols(); }
    std::vector<Parameter*> params();
};

/// Hidden activations (post-ReLU, one per non-final layer) plus logits.
struct ForwardTrace {
    std::vector<Value> hidden;
    Value logits;
};

/// Scaled dropout masks captured per layer input during a forward pass,
/// replayable on a row subset.
struct DropoutRecord {
    std::vector<Tensor> masks;

    DropoutRecord gather_rows(const std::vector<int>& idx) const;
};

/// Full-graph teacher forward; returns logits over all nodes.
Value gcn_forward(Tape& tape, const NormalizedAdjacency& adj, const Tensor& x,
                  const GCNTeacher& teacher, bool training, RandomStream* rng = nullptr);

/// Row-wise student forward on any subset of feature rows. When training
/// with dropout, masks come from `preset` when given (rng unused), else are
/// drawn from rng (and captured into `record` when non-null).
ForwardTrace mlp_forward(Tape& tape, const Tensor& x_rows, const MLPStudent& student,
                         bool training, RandomStream* rng = nullptr,
                         DropoutRecord* record = nullptr,
                         const DropoutRecord* preset = nullptr);

// Tape-free inference paths (identical outputs to the training=false
// forwards; used for evaluation and latency measurements).
Tensor gcn_infer(const NormalizedAdjacency& adj, const Tensor& x, const GCNTeacher& teacher);
Tensor mlp_infer(const MLPStudent& student, const Tensor& x_rows);

} // namespace gdistill
