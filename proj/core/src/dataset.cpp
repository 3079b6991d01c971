// SPDX-License-Identifier: Apache-2.0

#include "gdistill/dataset.hpp"

#include "gdistill/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace gdistill {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw IoError("cannot open for reading: " + path);
    return in;
}

std::ofstream open_out(const std::string& path, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw IoError("cannot open for writing: " + path);
    return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void check_disjoint(const std::vector<int>& a, const std::vector<int>& b, const char* what) {
    std::unordered_set<int> seen(a.begin(), a.end());
    for (int v : b) {
        if (seen.count(v)) {
            throw ValidationError(std::string("split: ") + what + " overlap at node " +
                                  std::to_string(v));
        }
    }
}

void check_range(const std::vector<int>& idx, int64_t n, const char* name) {
    for (int v : idx) {
        if (v < 0 || v >= n) {
            throw ValidationError(std::string("split: ") + name + " index " + std::to_string(v) +
                                  " out of [0, " + std::to_string(n) + ")");
        }
    }
}

} // namespace

void Split::validate(int64_t n) const {
    check_range(train, n, "train");
    check_range(val, n, "val");
    check_range(test, n, "test");
    check_disjoint(train, val, "train/val");
    check_disjoint(train, test, "train/test");
    check_disjoint(val, test, "val/test");
    if (observed.has_value() != unseen.has_value()) {
        throw ValidationError("split: observed and unseen must come together");
    }
    if (inductive()) {
        check_range(*observed, n, "observed");
        check_range(*unseen, n, "unseen");
        check_disjoint(*observed, *unseen, "observed/unseen");
        std::unordered_set<int> unseen_set(unseen->begin(), unseen->end());
        for (int v : test) {
            if (!unseen_set.count(v)) {
                throw ValidationError("split: inductive test node " + std::to_string(v) +
                                      " is not unseen");
            }
        }
    }
}

void Dataset::validate() const {
    graph.validate();
    if (features.rank() != 2 || features.rows() != graph.n) {
        throw ValidationError("dataset: feature rows must equal node count");
    }
    if (static_cast<int64_t>(labels.size()) != graph.n) {
        throw ValidationError("dataset: label count must equal node count");
    }
    for (size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw ValidationError("dataset: label " + std::to_string(labels[i]) + " at node " +
                                  std::to_string(i) + " outside [0, " +
                                  std::to_string(num_classes) + ")");
        }
    }
    if (!features.all_finite()) throw ValidationError("dataset: non-finite feature value");
    split.validate(graph.n);
}

Graph load_graph_file(const std::string& path) {
    std::ifstream in = open_in(path);
    std::string line;
    long lineno = 0;
    if (!std::getline(in, line)) throw ParseError(path + ": empty graph file", 1);
    ++lineno;
    int64_t n = -1;
    {
        std::istringstream ss(line);
        std::string word;
        if (!(ss >> word >> n) || word != "nodes" || n < 0) {
            throw ParseError(path + ": expected header 'nodes <N>'", lineno);
        }
    }
    std::vector<std::pair<int64_t, int64_t>> edges;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) {
            throw ParseError(path + ": expected 'src<TAB>dst'", lineno);
        }
        int64_t a = 0, b = 0;
        try {
            size_t used = 0;
            a = std::stoll(line.substr(0, tab), &used);
            if (used != tab) throw std::invalid_argument("trailing");
            std::string rest = line.substr(tab + 1);
            b = std::stoll(rest, &used);
            if (used != rest.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ParseError(path + ": malformed edge line", lineno);
        }
        if (a < 0 || a >= n || b < 0 || b >= n) {
            throw ValidationError(path + ": edge endpoint out of range at line " +
                                  std::to_string(lineno));
        }
        edges.emplace_back(a, b);
    }
    return Graph::from_edges(n, edges);
}

void save_graph_file(const Graph& g, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "nodes " << g.n << "\n";
    for (int64_t i = 0; i < g.n; ++i) {
        for (int64_t k = g.offsets[i]; k < g.offsets[i + 1]; ++k) {
            int64_t j = g.cols[static_cast<size_t>(k)];
            if (i < j) out << i << '\t' << j << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
}

namespace {

constexpr char kFeatureMagic[4] = {'G', 'D', 'F', 'M'};

template <typename T>
void read_raw(std::ifstream& in, T* dst, size_t count, const std::string& path) {
    in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(sizeof(T) * count));
    if (static_cast<size_t>(in.gcount()) != sizeof(T) * count) {
        throw FormatError("format error: truncated file: " + path);
    }
}

Tensor load_features_csv(const std::string& path) {
    std::ifstream in = open_in(path);
    std::vector<real> data;
    std::string line;
    long lineno = 0;
    int64_t cols = -1, rows = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        int64_t c = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                size_t used = 0;
                data.push_back(static_cast<real>(std::stod(cell, &used)));
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(path + ": malformed feature value '" + cell + "'", lineno);
            }
            ++c;
        }
        if (cols == -1) cols = c;
        if (c != cols) throw ParseError(path + ": inconsistent column count", lineno);
        ++rows;
    }
    if (rows == 0) throw ParseError(path + ": no feature rows", 1);
    return Tensor({rows, cols}, std::move(data));
}

} // namespace

Tensor load_features_file(const std::string& path) {
    if (ends_with(path, ".csv")) return load_features_csv(path);
    std::ifstream in = open_in(path, true);
    char magic[4];
    read_raw(in, magic, 4, path);
    if (std::memcmp(magic, kFeatureMagic, 4) != 0) {
        throw FormatError("format error: bad feature-file magic: " + path);
    }
    uint32_t version = 0;
    read_raw(in, &version, 1, path);
    if (version != 1) {
        throw FormatError("format error: unsupported feature-file version " +
                          std::to_string(version));
    }
    uint64_t rows = 0, cols = 0;
    read_raw(in, &rows, 1, path);
    read_raw(in, &cols, 1, path);
    std::vector<float> raw(rows * cols);
    read_raw(in, raw.data(), raw.size(), path);
    std::vector<real> data(raw.begin(), raw.end());
    return Tensor({static_cast<int64_t>(rows), static_cast<int64_t>(cols)}, std::move(data));
}

void save_features_binary(const Tensor& features, const std::string& path) {
    std::ofstream out = open_out(path, true);
    out.write(kFeatureMagic, 4);
    uint32_t version = 1;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    uint64_t rows = static_cast<uint64_t>(features.rows());
    uint64_t cols = static_cast<uint64_t>(features.cols());
    out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    std::vector<float> raw(static_cast<size_t>(features.size()));
    for (int64_t i = 0; i < features.size(); ++i) raw[static_cast<size_t>(i)] = static_cast<float>(features[i]);
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

void save_features_csv(const Tensor& features, const std::string& path) {
    std::ofstream out = open_out(path);
    out.precision(9);
    for (int64_t r = 0; r < features.rows(); ++r) {
        for (int64_t c = 0; c < features.cols(); ++c) {
            if (c) out << ',';
            out << features.at(r, c);
        }
        out << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

std::vector<int> load_labels_file(const std::string& path, int64_t expected_nodes) {
    std::ifstream in = open_in(path);
    std::vector<int> labels(static_cast<size_t>(expected_nodes), -1);
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (lineno == 1 && line.find_first_not_of("0123456789,-+ \r") != std::string::npos) {
            continue; // header line
        }
        size_t comma = line.find(',');
        if (comma == std::string::npos) throw ParseError(path + ": expected 'node_id,class_id'", lineno);
        long node = 0, cls = 0;
        try {
            node = std::stol(line.substr(0, comma));
            cls = std::stol(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError(path + ": malformed label line", lineno);
        }
        if (node < 0 || node >= expected_nodes) {
            throw ValidationError(path + ": node id " + std::to_string(node) + " out of range");
        }
        if (labels[static_cast<size_t>(node)] != -1) {
            throw ValidationError(path + ": duplicate label for node " + std::to_string(node));
        }
        labels[static_cast<size_t>(node)] = static_cast<int>(cls);
    }
    for (int64_t i = 0; i < expected_nodes; ++i) {
        if (labels[static_cast<size_t>(i)] == -1) {
            throw ValidationError(path + ": missing label for node " + std::to_string(i));
        }
    }
    return labels;
}

void save_labels_file(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "node_id,class_id\n";
    for (size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
    if (!out) throw IoError("write failed: " + path);
}

namespace {

std::vector<int> json_index_array(const json& j, const char* key) {
    std::vector<int> out;
    if (!j.contains(key)) return out;
    for (const auto& v : j.at(key)) out.push_back(v.get<int>());
    return out;
}

} // namespace

Split load_split_file(const std::string& path) {
    std::ifstream in = open_in(path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
    Split s;
    s.train = json_index_array(j, "train");
    s.val = json_index_array(j, "val");
    s.test = json_index_array(j, "test");
    if (j.contains("observed")) s.observed = json_index_array(j, "observed");
    if (j.contains("unseen")) s.unseen = json_index_array(j, "unseen");
    return s;
}

void save_split_file(const Split& split, const std::string& path) {
    json j;
    j["train"] = split.train;
    j["val"] = split.val;
    j["test"] = split.test;
    if (split.observed) j["observed"] = *split.observed;
    if (split.unseen) j["unseen"] = *split.unseen;
    std::ofstream out = open_out(path);
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& graph_path, const std::string& features_path,
                     const std::string& labels_path,
                     const std::optional<std::string>& split_path,
                     std::optional<int> expected_classes) {
    Dataset ds;
    ds.graph = load_graph_file(graph_path);
    ds.features = load_features_file(features_path);
    if (ds.features.rows() != ds.graph.n) {
        throw ValidationError("feature row count " + std::to_string(ds.features.rows()) +
                              " != node count " + std::to_string(ds.graph.n));
    }
    ds.labels = load_labels_file(labels_path, ds.graph.n);
    int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
    int min_label = *std::min_element(ds.labels.begin(), ds.labels.end());
    if (min_label < 0) throw ValidationError("negative class id in labels");
    ds.num_classes = expected_classes.value_or(max_label + 1);
    if (split_path) ds.split = load_split_file(*split_path);
    ds.validate();
    return ds;
}

DatasetPaths dataset_paths(const std::string& prefix) {
    return DatasetPaths{prefix + ".graph", prefix + ".features", prefix + ".labels.csv",
                        prefix + ".split.json"};
}

DatasetPaths save_dataset(const Dataset& ds, const std::string& prefix) {
    DatasetPaths paths = dataset_paths(prefix);
    save_graph_file(ds.graph, paths.graph);
    save_features_binary(ds.features, paths.features);
    save_labels_file(ds.labels, paths.labels);
    if (!ds.split.empty()) save_split_file(ds.split, paths.split);
    return paths;
}

} // namespace gdistill
