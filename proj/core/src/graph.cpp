// SPDX-License-Identifier: Apache-2.0

#include "gdistill/graph.hpp"

#include "gdistill/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gdistill {

Graph Graph::from_edges(int64_t n, const std::vector<std::pair<int64_t, int64_t>>& edges) {
    if (n < 0) throw ValidationError("graph: negative node count");
    std::vector<std::vector<int64_t>> adj(static_cast<size_t>(n));
    for (const auto& [a, b] : edges) {
        if (a < 0 || a >= n || b < 0 || b >= n) {
            throw ValidationError("graph: edge endpoint " + std::to_string(std::max(a, b)) +
                                  " out of [0, " + std::to_string(n) + ")");
        }
        if (a == b) continue; // self-loops live only in the normalized matrix
        adj[static_cast<size_t>(a)].push_back(b);
        adj[static_cast<size_t>(b)].push_back(a);
    }
    Graph g;
    g.n = n;
    g.offsets.assign(static_cast<size_t>(n) + 1, 0);
    for (int64_t i = 0; i < n; ++i) {
        auto& row = adj[static_cast<size_t>(i)];
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
        g.offsets[static_cast<size_t>(i) + 1] =
            g.offsets[static_cast<size_t>(i)] + static_cast<int64_t>(row.size());
        g.cols.insert(g.cols.end(), row.begin(), row.end());
    }
    return g;
}

bool Graph::has_edge(int64_t i, int64_t j) const {
    auto begin = cols.begin() + offsets[i];
    auto end = cols.begin() + offsets[i + 1];
    return std::binary_search(begin, end, j);
}

void Graph::validate() const {
    if (static_cast<int64_t>(offsets.size()) != n + 1) {
        throw ValidationError("graph: offsets length must be n+1");
    }
    if (offsets.front() != 0 || offsets.back() != static_cast<int64_t>(cols.size())) {
        throw ValidationError("graph: offset endpoints inconsistent with cols");
    }
    for (int64_t i = 0; i < n; ++i) {
        if (offsets[i + 1] < offsets[i]) throw ValidationError("graph: offsets not monotone");
        for (int64_t k = offsets[i]; k < offsets[i + 1]; ++k) {
            int64_t j = cols[static_cast<size_t>(k)];
            if (j < 0 || j >= n) throw ValidationError("graph: column index out of range");
            if (j == i) throw ValidationError("graph: stored self-loop at node " + std::to_string(i));
            if (k > offsets[i] && cols[static_cast<size_t>(k - 1)] >= j) {
                throw ValidationError("graph: row not sorted/deduplicated at node " +
                                      std::to_string(i));
            }
            if (!has_edge(j, i)) {
                throw ValidationError("graph: asymmetric edge (" + std::to_string(i) + "," +
                                      std::to_string(j) + ")");
            }
        }
    }
}

NormalizedAdjacency normalize_adjacency(const Graph& g) {
    NormalizedAdjacency a;
    a.n = g.n;
    a.offsets.assign(static_cast<size_t>(g.n) + 1, 0);
    std::vector<real> inv_sqrt(static_cast<size_t>(g.n));
    for (int64_t i = 0; i < g.n; ++i) {
        inv_sqrt[static_cast<size_t>(i)] =
            real(1) / std::sqrt(static_cast<real>(g.degree(i) + 1));
    }
    a.cols.reserve(g.cols.size() + static_cast<size_t>(g.n));
    a.values.reserve(a.cols.capacity());
    for (int64_t i = 0; i < g.n; ++i) {
        bool diag_done = false;
        auto emit = [&](int64_t j) {
            a.cols.push_back(j);
            a.values.push_back(inv_sqrt[static_cast<size_t>(i)] * inv_sqrt[static_cast<size_t>(j)]);
        };
        for (int64_t k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
            int64_t j = g.cols[static_cast<size_t>(k)];
            if (!diag_done && j > i) {
                emit(i);
                diag_done = true;
            }
            emit(j);
        }
        if (!diag_done) emit(i);
        a.offsets[static_cast<size_t>(i) + 1] = static_cast<int64_t>(a.cols.size());
    }
    return a;
}

Tensor spmm(const NormalizedAdjacency& adj, const Tensor& h) {
    if (h.rank() != 2 || h.rows() != adj.n) {
        throw DimensionError("spmm: dense operand must have one row per node");
    }
    int64_t f = h.cols();
    Tensor out({adj.n, f});
    for (int64_t i = 0; i < adj.n; ++i) {
        real* orow = out.data() + i * f;
        for (int64_t k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
            real w = adj.values[static_cast<size_t>(k)];
            const real* hrow = h.data() + adj.cols[static_cast<size_t>(k)] * f;
            for (int64_t j = 0; j < f; ++j) orow[j] += w * hrow[j];
        }
    }
    return out;
}

Value spmm(Tape& tape, const NormalizedAdjacency& adj, Value h) {
    Tensor out = spmm(adj, tape.value(h));
    if (!tape.requires_grad(h)) return tape.make_node(std::move(out), false, nullptr);
    int hid = h.id;
    const NormalizedAdjacency* a = &adj; // caller keeps the adjacency alive
    return tape.make_node(std::move(out), true, [hid, a](Tape& t, const Tensor& g) {
        if (!t.wants_grad(hid)) return;
        // symmetric matrix: d h = A^T g = A g
        Tensor contribution = spmm(*a, g);
        Tensor& gh = t.grad_buffer(hid);
        for (int64_t i = 0; i < gh.size(); ++i) gh[i] += contribution[i];
    });
}

Graph induced_subgraph(const Graph& g, const std::vector<int>& keep,
                       std::vector<int64_t>& old_to_new) {
    old_to_new.assign(static_cast<size_t>(g.n), -1);
    for (size_t i = 0; i < keep.size(); ++i) {
        int64_t v = keep[i];
        if (v < 0 || v >= g.n) throw IndexError("induced_subgraph: node id out of range");
        if (old_to_new[static_cast<size_t>(v)] != -1) {
            throw ContractError("induced_subgraph: duplicate node id");
        }
        old_to_new[static_cast<size_t>(v)] = static_cast<int64_t>(i);
    }
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t i = 0; i < g.n; ++i) {
        int64_t ni = old_to_new[static_cast<size_t>(i)];
        if (ni < 0) continue;
        for (int64_t k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
            int64_t j = g.cols[static_cast<size_t>(k)];
            int64_t nj = old_to_new[static_cast<size_t>(j)];
            if (nj < 0 || j < i) continue;
            edges.emplace_back(ni, nj);
        }
    }
    return Graph::from_edges(static_cast<int64_t>(keep.size()), edges);
}

} // namespace gdistill
