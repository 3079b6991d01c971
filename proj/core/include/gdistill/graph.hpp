// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "gdistill/tape.hpp"
#include "gdistill/tensor.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gdistill {

/// Undirected, unweighted graph in CSR form. Rows are sorted and
/// deduplicated, adjacency is symmetric, self-loops are never stored.
struct Graph {
    int64_t n = 0;
    std::vector<int64_t> offsets; // length n+1, monotone
    std::vector<int64_t> cols;

    /// Build from an edge list: symmetrizes, dedups, drops self-loops,
    /// validates index ranges.
    static Graph from_edges(int64_t n, const std::vector<std::pair<int64_t, int64_t>>& edges);

    int64_t degree(int64_t i) const { return offsets[i + 1] - offsets[i]; }
    /// Undirected edge count (each edge stored twice in CSR).
    int64_t edge_count() const { return static_cast<int64_t>(cols.size()) / 2; }
    bool has_edge(int64_t i, int64_t j) const;

    /// Throws ValidationError on any structural invariant violation.
    void validate() const;
};

/// Symmetrically normalized adjacency with self-loops:
/// entry (i,j) = 1 / sqrt((deg_i + 1) * (deg_j + 1)), diagonal included.
struct NormalizedAdjacency {
    int64_t n = 0;
    std::vector<int64_t> offsets;
    std::vector<int64_t> cols;
    std::vector<real> values;
};

NormalizedAdjacency normalize_adjacency(const Graph& g);

/// Sparse-dense product: out = A_hat * h. h must have n rows.
Tensor spmm(const NormalizedAdjacency& adj, const Tensor& h);

/// Tape-recorded variant, differentiable w.r.t. h (the adjacency is
/// constant; the matrix is symmetric so the backward pass reuses it).
Value spmm(Tape& tape, const NormalizedAdjacency& adj, Value h);

/// Induced subgraph on `keep` (old node ids, strictly increasing not
/// required). old_to_new maps old id -> new id, -1 when dropped.
Graph induced_subgraph(const Graph& g, const std::vector<int>& keep,
                       std::vector<int64_t>& old_to_new);

} // namespace gdistill
