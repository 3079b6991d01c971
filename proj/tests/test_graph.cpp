// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "gdistill/dataset.hpp"
#include "gdistill/error.hpp"
#include "gdistill/graph.hpp"
#include "gdistill/ops.hpp"
#include "gdistill/random.hpp"
#include "gdistill/sbm.hpp"
#include "gdistill/splits.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace gdistill;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gdtest_graph_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

Graph random_graph(int64_t n, double p, uint64_t seed) {
    RandomStream rng(seed);
    std::vector<std::pair<int64_t, int64_t>> edges;
    for (int64_t i = 0; i < n; ++i) {
        for (int64_t j = i + 1; j < n; ++j) {
            if (rng.bernoulli(p)) edges.emplace_back(i, j);
        }
    }
    return Graph::from_edges(n, edges);
}

} // namespace

TEST_CASE("graph construction symmetrizes, dedups, rejects bad input") {
    Graph g = Graph::from_edges(3, {{0, 1}, {1, 0}, {0, 1}, {2, 2}});
    g.validate();
    CHECK(g.edge_count() == 1);
    CHECK(g.has_edge(0, 1));
    CHECK(g.has_edge(1, 0));
    CHECK_FALSE(g.has_edge(2, 2)); // self-loop dropped
    CHECK(g.degree(2) == 0);

    CHECK_THROWS_AS(Graph::from_edges(2, {{0, 2}}), ValidationError);
}

TEST_CASE("normalize_adjacency closed forms") {
    // single isolated node -> [[1.0]]
    Graph isolated = Graph::from_edges(1, {});
    NormalizedAdjacency a1 = normalize_adjacency(isolated);
    CHECK(a1.values.size() == 1);
    CHECK(a1.values[0] == doctest::Approx(1.0).epsilon(1e-15));

    // 2-node path -> all four entries 0.5
    Graph path = Graph::from_edges(2, {{0, 1}});
    NormalizedAdjacency a2 = normalize_adjacency(path);
    CHECK(a2.values.size() == 4);
    for (real v : a2.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-15));

    // triangle -> all nine entries 1/3
    Graph tri = Graph::from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
    NormalizedAdjacency a3 = normalize_adjacency(tri);
    CHECK(a3.values.size() == 9);
    for (real v : a3.values) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("normalized adjacency is symmetric and satisfies the degree identity") {
    Graph g = random_graph(40, 0.12, 17);
    NormalizedAdjacency a = normalize_adjacency(g);
    // exact symmetry: same formula both sides
    for (int64_t i = 0; i < a.n; ++i) {
        for (int64_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
            int64_t j = a.cols[static_cast<size_t>(k)];
            bool found = false;
            for (int64_t k2 = a.offsets[j]; k2 < a.offsets[j + 1]; ++k2) {
                if (a.cols[static_cast<size_t>(k2)] == i) {
                    CHECK(a.values[static_cast<size_t>(k2)] == a.values[static_cast<size_t>(k)]);
                    found = true;
                }
            }
            CHECK(found);
        }
    }
    // sum_j A(i,j) * sqrt(d_j + 1) == sqrt(d_i + 1)
    for (int64_t i = 0; i < a.n; ++i) {
        double lhs = 0;
        for (int64_t k = a.offsets[i]; k < a.offsets[i + 1]; ++k) {
            int64_t j = a.cols[static_cast<size_t>(k)];
            lhs += a.values[static_cast<size_t>(k)] * std::sqrt(static_cast<double>(g.degree(j) + 1));
        }
        CHECK(std::fabs(lhs - std::sqrt(static_cast<double>(g.degree(i) + 1))) < 1e-9);
    }
}

TEST_CASE("spmm: identity case, path average, dense oracle") {
    Graph edgeless = Graph::from_edges(3, {});
    NormalizedAdjacency eye = normalize_adjacency(edgeless);
    Tensor h = Tensor::from_rows({{1, 2}, {3, 4}, {5, 6}});
    Tensor out = spmm(eye, h);
    for (int64_t i = 0; i < h.size(); ++i) CHECK(out[i] == doctest::Approx(h[i]).epsilon(1e-15));

    Graph path = Graph::from_edges(2, {{0, 1}});
    NormalizedAdjacency a = normalize_adjacency(path);
    Tensor v = Tensor::from_rows({{2}, {4}});
    Tensor av = spmm(a, v);
    CHECK(av[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(av[1] == doctest::Approx(3.0).epsilon(1e-15));

    CHECK_THROWS_AS(spmm(a, Tensor::from_rows({{1}, {2}, {3}})), DimensionError);

    // dense oracle on a <= 50 node random graph
    Graph g = random_graph(50, 0.1, 23);
    NormalizedAdjacency na = normalize_adjacency(g);
    RandomStream rng(5);
    Tensor x({50, 7});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<real>(rng.normal());
    Tensor sparse = spmm(na, x);
    Tensor dense({50, 50});
    for (int64_t i = 0; i < na.n; ++i) {
        for (int64_t k = na.offsets[i]; k < na.offsets[i + 1]; ++k) {
            dense.at(i, na.cols[static_cast<size_t>(k)]) = na.values[static_cast<size_t>(k)];
        }
    }
    Tensor expected = matmul(dense, x);
    for (int64_t i = 0; i < sparse.size(); ++i) {
        CHECK(std::fabs(sparse[i] - expected[i]) < 1e-10);
    }
}

TEST_CASE("spmm gradient equals the dense matmul oracle") {
    Graph g = random_graph(5, 0.5, 31);
    NormalizedAdjacency na = normalize_adjacency(g);
    Tensor dense({5, 5});
    for (int64_t i = 0; i < na.n; ++i) {
        for (int64_t k = na.offsets[i]; k < na.offsets[i + 1]; ++k) {
            dense.at(i, na.cols[static_cast<size_t>(k)]) = na.values[static_cast<size_t>(k)];
        }
    }
    RandomStream rng(9);
    Tensor x({5, 3});
    for (int64_t i = 0; i < x.size(); ++i) x[i] = static_cast<real>(rng.normal());

    Tensor g_sparse, g_dense;
    {
        Tape tape;
        Value xv = tape.input(x, true);
        tape.backward(sum_all(mul(spmm(tape, na, xv), spmm(tape, na, xv))));
        g_sparse = tape.grad(xv);
    }
    {
        Tape tape;
        Value xv = tape.input(x, true);
        Value d = tape.constant(dense);
        tape.backward(sum_all(mul(matmul(d, xv), matmul(d, xv))));
        g_dense = tape.grad(xv);
    }
    for (int64_t i = 0; i < g_sparse.size(); ++i) {
        CHECK(std::fabs(g_sparse[i] - g_dense[i]) < 1e-10);
    }
}

TEST_CASE("dataset files round trip and validate") {
    TempDir dir;
    // 2-node, 1-edge graph
    write_text(dir.file("g.graph"), "nodes 2\n0\t1\n");
    Graph g = load_graph_file(dir.file("g.graph"));
    CHECK(g.n == 2);
    CHECK(g.offsets == std::vector<int64_t>{0, 1, 2});
    CHECK(g.cols == std::vector<int64_t>{1, 0});

    // empty edge file with 3 nodes is a valid edgeless graph
    write_text(dir.file("empty.graph"), "nodes 3\n");
    Graph empty = load_graph_file(dir.file("empty.graph"));
    empty.validate();
    CHECK(empty.n == 3);
    CHECK(empty.edge_count() == 0);

    // malformed line reports its number
    write_text(dir.file("bad.graph"), "nodes 2\n0 1\n");
    try {
        load_graph_file(dir.file("bad.graph"));
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }

    // binary features round trip through f32
    Tensor f = Tensor::from_rows({{0.25, -1.5}, {3.0, 0.125}});
    save_features_binary(f, dir.file("f.bin"));
    Tensor f2 = load_features_file(dir.file("f.bin"));
    CHECK(f2.same_shape(f));
    for (int64_t i = 0; i < f.size(); ++i) CHECK(f2[i] == f[i]); // exact in f32

    save_features_csv(f, dir.file("f.csv"));
    Tensor f3 = load_features_file(dir.file("f.csv"));
    for (int64_t i = 0; i < f.size(); ++i) CHECK(f3[i] == doctest::Approx(f[i]).epsilon(1e-7));

    // truncated binary -> format error
    write_text(dir.file("trunc.bin"), "GDFM");
    CHECK_THROWS_AS(load_features_file(dir.file("trunc.bin")), FormatError);
    write_text(dir.file("badmagic.bin"), "NOPExxxxxxxxxxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(load_features_file(dir.file("badmagic.bin")), FormatError);

    // labels with and without header
    write_text(dir.file("l.csv"), "node_id,class_id\n0,1\n1,0\n");
    std::vector<int> labels = load_labels_file(dir.file("l.csv"), 2);
    CHECK(labels == std::vector<int>{1, 0});
    write_text(dir.file("l2.csv"), "0,1\n1,0\n");
    CHECK(load_labels_file(dir.file("l2.csv"), 2) == labels);
    write_text(dir.file("l3.csv"), "0,1\n");
    CHECK_THROWS_AS(load_labels_file(dir.file("l3.csv"), 2), ValidationError);

    // full load_dataset with class-count contract
    save_features_binary(f, dir.file("ds.features"));
    write_text(dir.file("ds.graph"), "nodes 2\n0\t1\n");
    write_text(dir.file("ds.labels"), "0,0\n1,1\n");
    Dataset ds = load_dataset(dir.file("ds.graph"), dir.file("ds.features"), dir.file("ds.labels"));
    CHECK(ds.num_classes == 2);
    // class id == C must fail validation when C is pinned
    CHECK_THROWS_AS(load_dataset(dir.file("ds.graph"), dir.file("ds.features"),
                                 dir.file("ds.labels"), std::nullopt, 1),
                    ValidationError);

    // feature/label count mismatch
    write_text(dir.file("big.graph"), "nodes 3\n0\t1\n");
    CHECK_THROWS_AS(load_dataset(dir.file("big.graph"), dir.file("ds.features"),
                                 dir.file("ds.labels")),
                    ValidationError);
}

TEST_CASE("split JSON round trip") {
    TempDir dir;
    Split s;
    s.train = {0, 1};
    s.val = {2};
    s.test = {3, 4};
    s.observed = std::vector<int>{0, 1, 2};
    s.unseen = std::vector<int>{3, 4};
    save_split_file(s, dir.file("s.json"));
    Split s2 = load_split_file(dir.file("s.json"));
    CHECK(s2.train == s.train);
    CHECK(s2.val == s.val);
    CHECK(s2.test == s.test);
    CHECK(*s2.observed == *s.observed);
    CHECK(*s2.unseen == *s.unseen);
    s2.validate(5);

    // overlap rejected
    Split bad = s;
    bad.val = {0};
    CHECK_THROWS_AS(bad.validate(5), ValidationError);
}

TEST_CASE("transductive split: balanced train, deterministic, seed-sensitive") {
    // 7 classes, 40 nodes each
    std::vector<int> labels;
    for (int c = 0; c < 7; ++c) {
        for (int i = 0; i < 40; ++i) labels.push_back(c);
    }
    Split s = make_transductive_split(labels, 7, 20, 60, 80, 1);
    CHECK(s.train.size() == 140);
    CHECK(s.val.size() == 60);
    CHECK(s.test.size() == 80);
    s.validate(static_cast<int64_t>(labels.size()));
    std::vector<int> per_class(7, 0);
    for (int v : s.train) ++per_class[static_cast<size_t>(labels[static_cast<size_t>(v)])];
    for (int c : per_class) CHECK(c == 20);

    Split same = make_transductive_split(labels, 7, 20, 60, 80, 1);
    CHECK(same.train == s.train);
    CHECK(same.val == s.val);
    Split other = make_transductive_split(labels, 7, 20, 60, 80, 2);
    CHECK(other.train != s.train);

    CHECK_THROWS_AS(make_transductive_split(labels, 7, 50, 60, 80, 1), ConfigError);
}

TEST_CASE("label-rate split sizes follow round(rate*N)") {
    std::vector<int> labels(2708, 0);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 7);
    Split one = make_label_rate_split(labels, 0.01, 500, 3);
    CHECK(one.train.size() == 27);
    CHECK(one.val.size() == 500);
    CHECK(one.test.size() == 2708 - 27 - 500);
    one.validate(2708);

    Split three = make_label_rate_split(labels, 0.03, 500, 3);
    CHECK(three.train.size() == 81);

    CHECK_THROWS_AS(make_label_rate_split(labels, 0.0, 500, 3), ConfigError);
    CHECK_THROWS_AS(make_label_rate_split(labels, 1.0, 500, 3), ConfigError);
    // a rate this low rounds to zero train nodes
    std::vector<int> tiny(20, 0);
    CHECK_THROWS_AS(make_label_rate_split(tiny, 0.01, 5, 3), ConfigError);
}

TEST_CASE("inductive split holds out unseen nodes completely") {
    std::vector<int> labels(100);
    for (size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
    Split s = make_inductive_split(labels, 4, 0.2, 5, 20, 11);
    CHECK(s.unseen->size() == 20);
    CHECK(s.observed->size() == 80);
    CHECK(s.test == *s.unseen);
    s.validate(100);

    // observed ∪ unseen covers all nodes, disjoint
    std::set<int> all(s.observed->begin(), s.observed->end());
    for (int v : *s.unseen) CHECK(all.insert(v).second);
    CHECK(all.size() == 100);

    // the induced observed subgraph touches no unseen node
    Graph g = random_graph(100, 0.08, 13);
    std::vector<int64_t> old_to_new;
    Graph induced = induced_subgraph(g, *s.observed, old_to_new);
    induced.validate();
    CHECK(induced.n == 80);
    for (int v : *s.unseen) CHECK(old_to_new[static_cast<size_t>(v)] == -1);
    // every induced edge maps back to an observed-observed edge
    for (int64_t i = 0; i < induced.n; ++i) {
        for (int64_t k = induced.offsets[i]; k < induced.offsets[i + 1]; ++k) {
            int64_t j = induced.cols[static_cast<size_t>(k)];
            CHECK(g.has_edge((*s.observed)[static_cast<size_t>(i)],
                             (*s.observed)[static_cast<size_t>(j)]));
        }
    }

    CHECK_THROWS_AS(make_inductive_split(labels, 4, 0.0, 5, 20, 11), ConfigError);
    CHECK_THROWS_AS(make_inductive_split(labels, 4, 1.0, 5, 20, 11), ConfigError);
}

TEST_CASE("sbm generator extremes and determinism") {
    SbmParams p;
    p.classes = 2;
    p.nodes_per_class = 3;
    p.p_in = 1.0;
    p.p_out = 0.0;
    p.feature_dim = 4;
    p.feature_noise = 0.0;
    Dataset ds = generate_sbm(p);
    ds.graph.validate();
    CHECK(ds.num_nodes() == 6);
    // two disjoint cliques
    for (int64_t i = 0; i < 3; ++i) {
        for (int64_t j = 0; j < 3; ++j) {
            if (i != j) {
                CHECK(ds.graph.has_edge(i, j));
                CHECK(ds.graph.has_edge(i + 3, j + 3));
            }
            CHECK_FALSE(ds.graph.has_edge(i, j + 3));
        }
    }
    // noise-free features are exactly the one-hot centroids
    for (int64_t i = 0; i < 6; ++i) {
        for (int64_t d = 0; d < 4; ++d) {
            CHECK(ds.features.at(i, d) == (d == ds.labels[static_cast<size_t>(i)] ? 1.0 : 0.0));
        }
    }

    SbmParams bad;
    bad.p_in = 0.1;
    bad.p_out = 0.5;
    CHECK_THROWS_AS(generate_sbm(bad), ConfigError);

    Dataset a = generate_sbm(sbm_test_preset());
    Dataset b = generate_sbm(sbm_test_preset());
    CHECK(a.graph.cols == b.graph.cols);
    for (int64_t i = 0; i < a.features.size(); ++i) CHECK(a.features[i] == b.features[i]);
}
