// SPDX-License-Identifier: Apache-2.0

#include "gdistill/checkpoint.hpp"

#include "gdistill/error.hpp"

#include <nlohmann/json.hpp>

#include <cstring>
#include <fstream>

namespace gdistill {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'G', 'D', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct Payload {
    json meta;
    std::vector<const Tensor*> tensors;
};

void write_file(const Payload& payload, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(kMagic, 4);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
    std::string meta = payload.meta.dump();
    uint64_t meta_len = meta.size();
    out.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    for (const Tensor* t : payload.tensors) {
        for (int64_t i = 0; i < t->size(); ++i) {
            double v = static_cast<double>((*t)[i]);
            out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

json read_header(std::ifstream& in, const std::string& path) {
    char magic[4];
    in.read(magic, 4);
    if (in.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("format error: bad checkpoint magic: " + path);
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (in.gcount() != sizeof(version) || version != kVersion) {
        throw FormatError("format error: unsupported checkpoint version in " + path);
    }
    uint64_t meta_len = 0;
    in.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
    if (static_cast<size_t>(in.gcount()) != sizeof(meta_len)) {
        throw FormatError("format error: truncated checkpoint header: " + path);
    }
    std::string meta(meta_len, '\0');
    in.read(meta.data(), static_cast<std::streamsize>(meta_len));
    if (static_cast<uint64_t>(in.gcount()) != meta_len) {
        throw FormatError("format error: truncated checkpoint metadata: " + path);
    }
    try {
        return json::parse(meta);
    } catch (const json::exception& e) {
        throw FormatError("format error: bad checkpoint metadata: " + std::string(e.what()));
    }
}

Tensor read_tensor(std::ifstream& in, const std::vector<int64_t>& shape,
                   const std::string& path) {
    Tensor t(shape);
    for (int64_t i = 0; i < t.size(); ++i) {
        double v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (static_cast<size_t>(in.gcount()) != sizeof(v)) {
            throw FormatError("format error: truncated checkpoint payload: " + path);
        }
        t[i] = static_cast<real>(v);
    }
    return t;
}

json param_decl(const Parameter& p) {
    return json{{"id", p.id}, {"shape", p.tensor.shape()}};
}

} // namespace

void save_checkpoint(const TeacherCheckpoint& ckpt, const std::string& path) {
    Payload payload;
    payload.meta["kind"] = "teacher";
    payload.meta["seed"] = ckpt.seed;
    payload.meta["best_epoch"] = ckpt.best_epoch;
    payload.meta["val_acc"] = ckpt.val_acc;
    payload.meta["test_acc"] = ckpt.test_acc;
    payload.meta["config"] = ckpt.config.to_json();
    payload.meta["activation"] = "relu";
    payload.meta["arch"] = {{"in_dim", ckpt.model.in_dim()},
                            {"out_dim", ckpt.model.out_dim()},
                            {"layers", ckpt.model.layers()},
                            {"dropout", static_cast<double>(ckpt.model.dropout)}};
    json decls = json::array();
    for (const Parameter& p : ckpt.model.weights) {
        decls.push_back(param_decl(p));
        payload.tensors.push_back(&p.tensor);
    }
    payload.meta["params"] = decls;
    write_file(payload, path);
}

void save_checkpoint(const EnsembleCheckpoint& ckpt, const std::string& path) {
    if (ckpt.students.empty()) throw ContractError("cannot save an empty ensemble");
    Payload payload;
    payload.meta["kind"] = "ensemble";
    payload.meta["method"] = ckpt.method;
    payload.meta["seed"] = ckpt.seed;
    payload.meta["best_epoch"] = ckpt.best_epoch;
    payload.meta["val_acc"] = ckpt.val_acc;
    payload.meta["test_acc"] = ckpt.test_acc;
    payload.meta["k"] = ckpt.ensemble_size();
    payload.meta["alpha_bar"] = ckpt.weights.alpha_bar;
    payload.meta["config"] = ckpt.config.to_json();
    payload.meta["activation"] = "relu";
    const MLPStudent& first = ckpt.students.front();
    payload.meta["arch"] = {{"in_dim", first.in_dim()},
                            {"out_dim", first.out_dim()},
                            {"layers", first.layers()},
                            {"hidden", first.layers() > 1 ? first.weights[0].tensor.cols() : first.out_dim()},
                            {"dropout", static_cast<double>(first.dropout)}};
    json decls = json::array();
    for (const MLPStudent& s : ckpt.students) {
        for (size_t l = 0; l < s.weights.size(); ++l) {
            decls.push_back(param_decl(s.weights[l]));
            payload.tensors.push_back(&s.weights[l].tensor);
            decls.push_back(param_decl(s.biases[l]));
            payload.tensors.push_back(&s.biases[l].tensor);
        }
    }
    payload.meta["params"] = decls;
    write_file(payload, path);
}

std::string checkpoint_kind(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    json meta = read_header(in, path);
    return meta.value("kind", "");
}

namespace {

std::vector<int64_t> shape_of(const json& decl) {
    std::vector<int64_t> shape;
    for (const auto& d : decl.at("shape")) shape.push_back(d.get<int64_t>());
    return shape;
}

} // namespace

TeacherCheckpoint load_teacher_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    json meta = read_header(in, path);
    if (meta.value("kind", "") != "teacher") {
        throw FormatError("format error: not a teacher checkpoint: " + path);
    }
    TeacherCheckpoint ckpt;
    ckpt.seed = meta.value("seed", uint64_t(0));
    ckpt.best_epoch = meta.value("best_epoch", -1);
    ckpt.val_acc = meta.value("val_acc", 0.0);
    ckpt.test_acc = meta.value("test_acc", 0.0);
    ckpt.config = TeacherConfig::from_json(meta.at("config"));
    ckpt.model.dropout = static_cast<real>(meta.at("arch").value("dropout", 0.5));
    for (const auto& decl : meta.at("params")) {
        Parameter p;
        p.id = decl.at("id").get<std::string>();
        p.tensor = read_tensor(in, shape_of(decl), path);
        ckpt.model.weights.push_back(std::move(p));
    }
    if (ckpt.model.weights.empty()) {
        throw FormatError("format error: teacher checkpoint without parameters");
    }
    return ckpt;
}

EnsembleCheckpoint load_ensemble_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    json meta = read_header(in, path);
    if (meta.value("kind", "") != "ensemble") {
        throw FormatError("format error: not an ensemble checkpoint: " + path);
    }
    EnsembleCheckpoint ckpt;
    ckpt.method = meta.value("method", "");
    ckpt.seed = meta.value("seed", uint64_t(0));
    ckpt.best_epoch = meta.value("best_epoch", -1);
    ckpt.val_acc = meta.value("val_acc", 0.0);
    ckpt.test_acc = meta.value("test_acc", 0.0);
    ckpt.config = DistillConfig::from_json(meta.at("config"));
    int k = meta.at("k").get<int>();
    for (const auto& v : meta.at("alpha_bar")) {
        ckpt.weights.alpha_bar.push_back(static_cast<real>(v.get<double>()));
    }
    real dropout = static_cast<real>(meta.at("arch").value("dropout", 0.5));
    int layers = meta.at("arch").value("layers", 2);
    const json& decls = meta.at("params");
    size_t cursor = 0;
    for (int s = 0; s < k; ++s) {
        MLPStudent student;
        student.dropout = dropout;
        for (int l = 0; l < layers; ++l) {
            if (cursor + 2 > decls.size()) {
                throw FormatError("format error: parameter declarations exhausted: " + path);
            }
            Parameter w, b;
            w.id = decls.at(cursor).at("id").get<std::string>();
            w.tensor = read_tensor(in, shape_of(decls.at(cursor)), path);
            ++cursor;
            b.id = decls.at(cursor).at("id").get<std::string>();
            b.tensor = read_tensor(in, shape_of(decls.at(cursor)), path);
            ++cursor;
            student.weights.push_back(std::move(w));
            student.biases.push_back(std::move(b));
        }
        ckpt.students.push_back(std::move(student));
    }
    if (static_cast<int>(ckpt.weights.alpha_bar.size()) != k) {
        throw FormatError("format error: alpha count does not match ensemble size");
    }
    return ckpt;
}

} // namespace gdistill
