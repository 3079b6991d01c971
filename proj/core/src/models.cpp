// SPDX-License-Identifier: Apache-2.0

#include "gdistill/models.hpp"

#include "gdistill/error.hpp"

#include <cmath>

namespace gdistill {

Tensor glorot_uniform(int64_t fan_in, int64_t fan_out, RandomStream& rng) {
    if (fan_in <= 0 || fan_out <= 0) throw ConfigError("glorot: widths must be positive");
    real bound = std::sqrt(real(6) / static_cast<real>(fan_in + fan_out));
    Tensor w({fan_in, fan_out});
    for (int64_t i = 0; i < w.size(); ++i) {
        w[i] = static_cast<real>(rng.uniform(-static_cast<double>(bound), static_cast<double>(bound)));
    }
    return w;
}

std::vector<Parameter> init_params(const std::string& prefix, const std::vector<int64_t>& widths,
                                   bool with_biases, uint64_t seed) {
    if (widths.size() < 2) throw ConfigError("init_params: need at least input and output widths");
    RandomStream rng(derive_seed(seed, "init." + prefix));
    std::vector<Parameter> params;
    for (size_t l = 0; l + 1 < widths.size(); ++l) {
        Parameter w;
        w.id = prefix + ".w" + std::to_string(l + 1);
        w.tensor = glorot_uniform(widths[l], widths[l + 1], rng);
        params.push_back(std::move(w));
        if (with_biases) {
            Parameter b;
            b.id = prefix + ".b" + std::to_string(l + 1);
            b.tensor = Tensor({1, widths[l + 1]});
            params.push_back(std::move(b));
        }
    }
    return params;
}

namespace {

std::vector<int64_t> layer_widths(int64_t in_dim, int64_t hidden, int64_t out_dim, int layers) {
    if (layers < 1) throw ConfigError("model needs at least one layer");
    std::vector<int64_t> widths{in_dim};
    for (int l = 0; l < layers - 1; ++l) widths.push_back(hidden);
    widths.push_back(out_dim);
    return widths;
}

} // namespace

GCNTeacher GCNTeacher::create(int64_t in_dim, int64_t hidden, int64_t out_dim, int layers,
                              real dropout, uint64_t seed) {
    GCNTeacher t;
    t.dropout = dropout;
    t.weights = init_params("gcn", layer_widths(in_dim, hidden, out_dim, layers), false, seed);
    return t;
}

std::vector<Parameter*> GCNTeacher::params() {
    std::vector<Parameter*> out;
    for (auto& w : weights) out.push_back(&w);
    return out;
}

MLPStudent MLPStudent::create(const std::string& prefix, int64_t in_dim, int64_t hidden,
                              int64_t out_dim, int layers, real dropout, uint64_t seed) {
    if (layers < 2) throw ConfigError("student MLP needs at least 2 layers");
    MLPStudent s;
    s.dropout = dropout;
    auto params = init_params(prefix, layer_widths(in_dim, hidden, out_dim, layers), true, seed);
    for (size_t i = 0; i < params.size(); i += 2) {
        s.weights.push_back(std::move(params[i]));
        s.biases.push_back(std::move(params[i + 1]));
    }
    return s;
}

std::vector<Parameter*> MLPStudent::params() {
    std::vector<Parameter*> out;
    for (size_t l = 0; l < weights.size(); ++l) {
        out.push_back(&weights[l]);
        out.push_back(&biases[l]);
    }
    return out;
}

Value gcn_forward(Tape& tape, const NormalizedAdjacency& adj, const Tensor& x,
                  const GCNTeacher& teacher, bool training, RandomStream* rng) {
    if (x.cols() != teacher.in_dim()) {
        throw DimensionError("gcn_forward: feature width does not match first layer");
    }
    if (training && teacher.dropout > real(0) && rng == nullptr) {
        throw ContractError("gcn_forward: training with dropout requires an rng");
    }
    Value h = tape.constant(x);
    int n_layers = teacher.layers();
    for (int l = 0; l < n_layers; ++l) {
        if (training && teacher.dropout > real(0)) {
            h = dropout(h, teacher.dropout, true, *rng);
        }
        Value w = tape.leaf(teacher.weights[static_cast<size_t>(l)]);
        h = spmm(tape, adj, matmul(h, w));
        if (l + 1 < n_layers) h = relu(h);
    }
    return h;
}

DropoutRecord DropoutRecord::gather_rows(const std::vector<int>& idx) const {
    DropoutRecord out;
    out.masks.reserve(masks.size());
    for (const Tensor& m : masks) {
        Tensor sub({static_cast<int64_t>(idx.size()), m.cols()});
        for (size_t r = 0; r < idx.size(); ++r) {
            const real* src = m.data() + static_cast<int64_t>(idx[r]) * m.cols();
            std::copy(src, src + m.cols(), sub.data() + static_cast<int64_t>(r) * m.cols());
        }
        out.masks.push_back(std::move(sub));
    }
    return out;
}

ForwardTrace mlp_forward(Tape& tape, const Tensor& x_rows, const MLPStudent& student,
                         bool training, RandomStream* rng, DropoutRecord* record,
                         const DropoutRecord* preset) {
    if (x_rows.cols() != student.in_dim()) {
        throw DimensionError("mlp_forward: feature width does not match first layer");
    }
    const bool drop = training && student.dropout > real(0);
    if (drop && preset == nullptr && rng == nullptr) {
        throw ContractError("mlp_forward: training with dropout requires an rng or preset masks");
    }
    ForwardTrace trace;
    Value h = tape.constant(x_rows);
    int n_layers = student.layers();
    for (int l = 0; l < n_layers; ++l) {
        // dropout on hidden-layer inputs only; raw features stay intact
        if (drop && l > 0) {
            Tensor mask = preset != nullptr
                              ? preset->masks.at(static_cast<size_t>(l - 1))
                              : make_dropout_mask(tape.value(h).shape(), student.dropout, *rng);
            if (record != nullptr) record->masks.push_back(mask);
            h = dropout_with_mask(h, std::move(mask));
        }
        Value w = tape.leaf(student.weights[static_cast<size_t>(l)]);
        Value b = tape.leaf(student.biases[static_cast<size_t>(l)]);
        h = add_rowvec(matmul(h, w), b);
        if (l + 1 < n_layers) {
            h = relu(h);
            trace.hidden.push_back(h);
        }
    }
    trace.logits = h;
    return trace;
}

Tensor gcn_infer(const NormalizedAdjacency& adj, const Tensor& x, const GCNTeacher& teacher) {
    Tensor h = x;
    int n_layers = teacher.layers();
    for (int l = 0; l < n_layers; ++l) {
        h = spmm(adj, matmul(h, teacher.weights[static_cast<size_t>(l)].tensor));
        if (l + 1 < n_layers) h = relu(h);
    }
    return h;
}

Tensor mlp_infer(const MLPStudent& student, const Tensor& x_rows) {
    Tensor h = x_rows;
    int n_layers = student.layers();
    for (int l = 0; l < n_layers; ++l) {
        h = add_rowvec(matmul(h, student.weights[static_cast<size_t>(l)].tensor),
                       student.biases[static_cast<size_t>(l)].tensor);
        if (l + 1 < n_layers) h = relu(h);
    }
    return h;
}

} // namespace gdistill
