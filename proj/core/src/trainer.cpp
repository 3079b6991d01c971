// SPDX-License-Identifier: Apache-2.0

#include "gdistill/trainer.hpp"

#include "gdistill/adaboost.hpp"
#include "gdistill/error.hpp"
#include "gdistill/models.hpp"
#include "gdistill/objectives.hpp"
#include "gdistill/optimizer.hpp"
#include "gdistill/random.hpp"
#include "gdistill/splits.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>
#include <unordered_map>

namespace gdistill {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

} // namespace

void RCPartition::validate(const std::vector<int>& labeled) const {
    std::unordered_map<int, int> counts;
    size_t total = 0;
    for (const auto& subset : subsets) {
        total += subset.size();
        for (int v : subset) {
            if (++counts[v] > 1) {
                throw ContractError("rc partition: node " + std::to_string(v) +
                                    " appears in two subsets");
            }
        }
    }
    if (total != labeled.size()) {
        throw ContractError("rc partition: subsets do not cover the labeled set");
    }
    for (int v : labeled) {
        if (!counts.count(v)) {
            throw ContractError("rc partition: labeled node " + std::to_string(v) + " missing");
        }
    }
}

RCPartition rc_partition(const std::vector<int>& labeled, int k, uint64_t seed) {
    if (k < 1) throw ConfigError("rc_partition: k must be >= 1");
    if (static_cast<int>(labeled.size()) < k) {
        throw ConfigError("rc_partition: fewer labeled nodes than students");
    }
    std::vector<int> pool = labeled;
    RandomStream rng(derive_seed(seed, "rc_partition"));
    rng.shuffle(pool);
    size_t base = pool.size() / static_cast<size_t>(k);
    RCPartition part;
    size_t cursor = 0;
    for (int i = 0; i < k; ++i) {
        size_t take = i + 1 < k ? base : pool.size() - cursor;
        std::vector<int> subset(pool.begin() + static_cast<long>(cursor),
                                pool.begin() + static_cast<long>(cursor + take));
        std::sort(subset.begin(), subset.end());
        part.subsets.push_back(std::move(subset));
        cursor += take;
    }
    return part;
}

std::vector<int> bootstrap_sample(const std::vector<int>& labeled, uint64_t seed) {
    if (labeled.empty()) throw ContractError("bootstrap_sample: empty labeled set");
    RandomStream rng(seed);
    std::vector<int> sample;
    sample.reserve(labeled.size());
    for (size_t r = 0; r < labeled.size(); ++r) {
        sample.push_back(labeled[rng.next_index(labeled.size())]);
    }
    std::sort(sample.begin(), sample.end());
    return sample;
}

Tensor mask_features(const Tensor& x_rows, double rho, RandomStream& rng) {
    if (rho < 0.0 || rho >= 1.0) throw ConfigError("mask_features: rho must lie in [0, 1)");
    Tensor out = x_rows;
    int64_t d = x_rows.cols();
    int per_row = static_cast<int>(std::floor(rho * static_cast<double>(d)));
    if (per_row == 0) return out;
    for (int64_t r = 0; r < x_rows.rows(); ++r) {
        std::vector<int> positions = rng.sample_without_replacement(static_cast<int>(d), per_row);
        for (int p : positions) out.at(r, p) = real(0);
    }
    return out;
}

nlohmann::json TrainReport::to_json() const {
    nlohmann::json j;
    j["best_epoch"] = best_epoch;
    j["best_val_acc"] = best_val_acc;
    j["test_acc"] = test_acc;
    j["train_ms"] = train_ms;
    j["epochs_run"] = epochs_run();
    j["config"] = config_echo;
    nlohmann::json rows = nlohmann::json::array();
    for (const EpochRecord& e : epochs) {
        nlohmann::json row{{"epoch", e.epoch}, {"val_acc", e.val_acc}};
        for (const auto& [name, value] : e.loss_terms) row[name] = value;
        rows.push_back(std::move(row));
    }
    j["epochs"] = rows;
    return j;
}

double accuracy(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw ContractError("accuracy: prediction/label count mismatch");
    }
    size_t hits = 0;
    for (size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

namespace {

Tensor gather_feature_rows(const Tensor& features, const std::vector<int>& idx) {
    Tensor out({static_cast<int64_t>(idx.size()), features.cols()});
    for (size_t r = 0; r < idx.size(); ++r) {
        const real* src = features.data() + static_cast<int64_t>(idx[r]) * features.cols();
        std::copy(src, src + features.cols(), out.data() + static_cast<int64_t>(r) * features.cols());
    }
    return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, const std::vector<int>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(labels[static_cast<size_t>(i)]);
    return out;
}

void check_finite_loss(double loss, int epoch) {
    if (!std::isfinite(loss)) {
        throw TrainingError("training loss diverged to a non-finite value", epoch);
    }
}

void check_nonnegative_terms(const std::vector<std::pair<std::string, double>>& terms,
                             int epoch) {
    for (const auto& [name, value] : terms) {
        if (value < -1e-9) {
            throw TrainingError("loss term '" + name + "' is negative: " + std::to_string(value),
                                epoch);
        }
    }
}

} // namespace

// --- teacher ----------------------------------------------------------------

TeacherResult train_teacher(const Dataset& ds, const TeacherConfig& cfg, uint64_t seed) {
    cfg.validate();
    if (ds.split.train.empty() || ds.split.val.empty()) {
        throw ConfigError("train_teacher: split needs nonempty train and val sets");
    }

    const bool inductive = ds.split.inductive();
    // In the inductive protocol the teacher sees only the induced subgraph
    // on observed nodes.
    Graph observed_graph;
    std::vector<int64_t> old_to_new;
    Tensor features;
    std::vector<int> labels, train_idx, val_idx;
    const Graph* graph = &ds.graph;
    if (inductive) {
        observed_graph = induced_subgraph(ds.graph, *ds.split.observed, old_to_new);
        graph = &observed_graph;
        features = gather_feature_rows(ds.features, *ds.split.observed);
        labels = gather_labels(ds.labels, *ds.split.observed);
        auto remap = [&](const std::vector<int>& idx) {
            std::vector<int> out;
            out.reserve(idx.size());
            for (int v : idx) {
                int64_t nv = old_to_new[static_cast<size_t>(v)];
                if (nv < 0) throw ContractError("train/val node outside the observed part");
                out.push_back(static_cast<int>(nv));
            }
            return out;
        };
        train_idx = remap(ds.split.train);
        val_idx = remap(ds.split.val);
    } else {
        features = ds.features;
        labels = ds.labels;
        train_idx = ds.split.train;
        val_idx = ds.split.val;
    }

    NormalizedAdjacency adj = normalize_adjacency(*graph);
    GCNTeacher model = GCNTeacher::create(ds.feature_dim(), cfg.hidden, ds.num_classes,
                                          cfg.layers, static_cast<real>(cfg.dropout),
                                          derive_seed(seed, "teacher.init"));
    RandomStream dropout_rng(derive_seed(seed, "teacher.dropout"));
    Adam optimizer(cfg.lr, cfg.weight_decay);
    std::vector<int> train_labels = gather_labels(labels, train_idx);
    std::vector<int> val_labels = gather_labels(labels, val_idx);

    auto eval_val = [&](const GCNTeacher& m) {
        Tensor logits = gcn_infer(adj, features, m);
        Tensor val_logits = gather_feature_rows(logits, val_idx);
        return accuracy(row_argmax(val_logits), val_labels);
    };

    TrainReport report;
    report.config_echo = cfg.to_json();
    report.config_echo["seed"] = seed;
    auto start = Clock::now();

    std::vector<Tensor> best_params;
    for (const Parameter& w : model.weights) best_params.push_back(w.tensor);
    report.best_val_acc = cfg.max_epochs > 0 ? -1.0 : eval_val(model);
    report.best_epoch = -1;

    int since_best = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Tape tape;
        Value logits = gcn_forward(tape, adj, features, model, true, &dropout_rng);
        LossValue loss = ce_loss(tape, gather_rows(logits, train_idx), train_labels);
        double loss_value = loss.value();
        check_finite_loss(loss_value, epoch);
        check_nonnegative_terms(loss.breakdown, epoch);
        tape.backward(loss.node);
        optimizer.step(model.params(), tape);

        double val_acc = eval_val(model);
        report.epochs.push_back({epoch, loss.breakdown, val_acc});
        // ties keep the later (sharper) parameters; patience counts only
        // epochs without strict improvement
        if (val_acc >= report.best_val_acc) {
            bool strict = val_acc > report.best_val_acc;
            report.best_val_acc = val_acc;
            report.best_epoch = epoch;
            for (size_t i = 0; i < model.weights.size(); ++i) {
                best_params[i] = model.weights[i].tensor;
            }
            if (strict) since_best = 0;
            else if (++since_best > cfg.patience) break;
        } else if (++since_best > cfg.patience) {
            break;
        }
    }
    for (size_t i = 0; i < model.weights.size(); ++i) model.weights[i].tensor = best_params[i];
    if (report.best_val_acc < 0.0) report.best_val_acc = eval_val(model);
    report.train_ms = ms_since(start);

    TeacherResult result;
    result.checkpoint.model = std::move(model);
    result.checkpoint.config = cfg;
    result.checkpoint.seed = seed;
    result.checkpoint.best_epoch = report.best_epoch;
    result.checkpoint.val_acc = report.best_val_acc;
    if (!ds.split.test.empty()) {
        // test accuracy always measured on the full graph
        Tensor logits = teacher_logits_full(ds, result.checkpoint);
        Tensor test_logits = gather_feature_rows(logits, ds.split.test);
        report.test_acc = accuracy(row_argmax(test_logits), gather_labels(ds.labels, ds.split.test));
    }
    result.checkpoint.test_acc = report.test_acc;
    result.report = std::move(report);
    return result;
}

Tensor teacher_logits_full(const Dataset& ds, const TeacherCheckpoint& teacher) {
    NormalizedAdjacency adj = normalize_adjacency(ds.graph);
    return gcn_infer(adj, ds.features, teacher.model);
}

// --- student methods ----------------------------------------------------------

DistillMethod distill_method_from_string(const std::string& s) {
    if (s == "adagmlp") return DistillMethod::adagmlp;
    if (s == "glnn") return DistillMethod::glnn;
    if (s == "bagging") return DistillMethod::bagging;
    if (s == "ensemble") return DistillMethod::ensemble;
    if (s == "mlp_only") return DistillMethod::mlp_only;
    throw ConfigError("unknown distill method: " + s);
}

std::string to_string(DistillMethod m) {
    switch (m) {
    case DistillMethod::adagmlp: return "adagmlp";
    case DistillMethod::glnn: return "glnn";
    case DistillMethod::bagging: return "bagging";
    case DistillMethod::ensemble: return "ensemble";
    case DistillMethod::mlp_only: return "mlp_only";
    }
    return "?";
}

CombineMode default_combine_mode(const EnsembleCheckpoint& ckpt) {
    return ckpt.method == "adagmlp" ? CombineMode::adaboost : CombineMode::average;
}

std::vector<Tensor> ensemble_logits(const EnsembleCheckpoint& ckpt, const Tensor& feature_rows,
                                    int threads) {
    size_t k = ckpt.students.size();
    std::vector<Tensor> logits(k);
    if (threads > 1 && k > 1) {
        std::vector<std::thread> workers;
        for (size_t i = 0; i < k; ++i) {
            workers.emplace_back([&, i] { logits[i] = mlp_infer(ckpt.students[i], feature_rows); });
        }
        for (auto& w : workers) w.join();
    } else {
        for (size_t i = 0; i < k; ++i) logits[i] = mlp_infer(ckpt.students[i], feature_rows);
    }
    return logits;
}

std::vector<int> ensemble_infer(const EnsembleCheckpoint& ckpt, const Tensor& feature_rows,
                                CombineMode mode, int threads) {
    std::vector<Tensor> logits = ensemble_logits(ckpt, feature_rows, threads);
    return ensemble_predict(logits, &ckpt.weights, mode);
}

namespace {

/// Everything the engine needs, expressed over the distillation universe
/// (all nodes transductively; observed nodes re-indexed inductively).
struct DistillInputs {
    Tensor features;              // [U x d]
    std::vector<int> labels;      // length U
    std::vector<int> train, val;  // universe indices
    Tensor teacher_logits;        // [U x C]
    Tensor test_features;         // eval rows (universe test or unseen nodes)
    std::vector<int> test_labels;
};

DistillInputs build_distill_inputs(const Dataset& ds, const TeacherCheckpoint& teacher) {
    if (ds.feature_dim() != teacher.model.in_dim() ||
        ds.num_classes != static_cast<int>(teacher.model.out_dim())) {
        throw ConfigError("teacher architecture does not match the dataset dimensions");
    }
    if (ds.split.train.empty() || ds.split.val.empty()) {
        throw ConfigError("distill: split needs nonempty train and val sets");
    }
    DistillInputs in;
    if (ds.split.inductive()) {
        const std::vector<int>& observed = *ds.split.observed;
        std::vector<int64_t> old_to_new;
        Graph observed_graph = induced_subgraph(ds.graph, observed, old_to_new);
        in.features = gather_feature_rows(ds.features, observed);
        in.labels = gather_labels(ds.labels, observed);
        auto remap = [&](const std::vector<int>& idx) {
            std::vector<int> out;
            out.reserve(idx.size());
            for (int v : idx) {
                int64_t nv = old_to_new[static_cast<size_t>(v)];
                if (nv < 0) throw ContractError("distill: split node outside the observed part");
                out.push_back(static_cast<int>(nv));
            }
            return out;
        };
        in.train = remap(ds.split.train);
        in.val = remap(ds.split.val);
        NormalizedAdjacency adj = normalize_adjacency(observed_graph);
        in.teacher_logits = gcn_infer(adj, in.features, teacher.model);
        in.test_features = gather_feature_rows(ds.features, *ds.split.unseen);
        in.test_labels = gather_labels(ds.labels, *ds.split.unseen);
    } else {
        in.features = ds.features;
        in.labels = ds.labels;
        in.train = ds.split.train;
        in.val = ds.split.val;
        in.teacher_logits = teacher_logits_full(ds, teacher);
        in.test_features = gather_feature_rows(ds.features, ds.split.test);
        in.test_labels = gather_labels(ds.labels, ds.split.test);
    }
    return in;
}

/// Per-student CE index sets for one run.
std::vector<std::vector<int>> ce_subsets(const DistillInputs& in, const DistillConfig& cfg,
                                         DistillMethod method, int k, uint64_t run_seed,
                                         int epoch) {
    std::vector<std::vector<int>> subsets;
    switch (method) {
    case DistillMethod::adagmlp:
        if (cfg.rc_enabled) {
            uint64_t seed = cfg.rc_resample_per_epoch
                                ? derive_seed(run_seed, "rc", static_cast<uint64_t>(epoch))
                                : derive_seed(run_seed, "rc");
            subsets = rc_partition(in.train, k, seed).subsets;
        } else {
            subsets.assign(static_cast<size_t>(k), in.train); // pooled CE
        }
        break;
    case DistillMethod::bagging: {
        for (int i = 0; i < k; ++i) {
            subsets.push_back(
                bootstrap_sample(in.train, derive_seed(run_seed, "bootstrap",
                                                       static_cast<uint64_t>(i))));
        }
        break;
    }
    default:
        subsets.assign(static_cast<size_t>(k), in.train);
        break;
    }
    return subsets;
}

struct BestState {
    double val_acc = -1.0;
    int epoch = -1;
    std::vector<std::vector<Tensor>> params; // per student, declared order
    std::vector<real> alphas;
};

void snapshot(BestState& best, std::vector<MLPStudent>& students, const std::vector<real>& alphas,
              double val_acc, int epoch) {
    best.val_acc = val_acc;
    best.epoch = epoch;
    best.alphas = alphas;
    best.params.assign(students.size(), {});
    for (size_t s = 0; s < students.size(); ++s) {
        for (const Parameter* p : students[s].params()) {
            best.params[s].push_back(p->tensor);
        }
    }
}

void restore(const BestState& best, std::vector<MLPStudent>& students) {
    if (best.params.empty()) return;
    for (size_t s = 0; s < students.size(); ++s) {
        auto ptrs = students[s].params();
        for (size_t i = 0; i < ptrs.size(); ++i) ptrs[i]->tensor = best.params[s][i];
    }
}

} // namespace

DistillResult distill(const Dataset& ds, const TeacherCheckpoint& teacher,
                      const DistillConfig& cfg, DistillMethod method) {
    cfg.validate();
    DistillInputs in = build_distill_inputs(ds, teacher);
    const int64_t universe = in.features.rows();
    const int k = (method == DistillMethod::glnn || method == DistillMethod::mlp_only)
                      ? 1
                      : cfg.k;
    if (method == DistillMethod::bagging && cfg.k < 2) {
        throw ConfigError("bagging needs an ensemble of at least 2 students");
    }
    if (static_cast<int>(in.train.size()) < k) {
        throw ConfigError("fewer labeled nodes than ensemble members");
    }

    const uint64_t run_seed = cfg.seed;
    std::vector<MLPStudent> students;
    std::vector<RandomStream> dropout_rngs, mask_rngs, na_dropout_rngs;
    for (int i = 0; i < k; ++i) {
        students.push_back(MLPStudent::create(
            "mlp" + std::to_string(i), in.features.cols(), cfg.hidden,
            static_cast<int64_t>(ds.num_classes), cfg.layers, static_cast<real>(cfg.dropout),
            derive_seed(run_seed, "student", static_cast<uint64_t>(i))));
        dropout_rngs.emplace_back(derive_seed(run_seed, "dropout", static_cast<uint64_t>(i)));
        mask_rngs.emplace_back(derive_seed(run_seed, "mask", static_cast<uint64_t>(i)));
        na_dropout_rngs.emplace_back(
            derive_seed(run_seed, "na_dropout", static_cast<uint64_t>(i)));
    }
    std::vector<Parameter*> all_params;
    for (auto& s : students) {
        for (Parameter* p : s.params()) all_params.push_back(p);
    }
    Adam optimizer(cfg.lr, cfg.weight_decay);

    const bool use_na = method == DistillMethod::adagmlp && cfg.na_enabled;
    const bool use_cascade = method == DistillMethod::adagmlp && cfg.adakd_enabled;
    std::vector<std::vector<int>> subsets = ce_subsets(in, cfg, method, k, run_seed, 0);
    std::vector<std::vector<int>> subset_labels;
    for (const auto& subset : subsets) subset_labels.push_back(gather_labels(in.labels, subset));

    Tensor val_features = gather_feature_rows(in.features, in.val);
    std::vector<int> val_labels = gather_labels(in.labels, in.val);

    NodeWeights node_weights = NodeWeights::uniform(universe);
    std::vector<real> current_alphas(static_cast<size_t>(k), real(1));

    auto combine_for_eval = [&](const std::vector<Tensor>& logits,
                                const std::vector<real>& alphas) {
        if (method == DistillMethod::adagmlp) {
            EnsembleWeights ew = normalize_alphas(alphas);
            return ensemble_predict(logits, &ew, CombineMode::adaboost);
        }
        return ensemble_predict(logits, nullptr, CombineMode::average);
    };
    auto eval_acc = [&](const Tensor& rows, const std::vector<int>& labels,
                        const std::vector<real>& alphas) {
        std::vector<Tensor> logits;
        logits.reserve(students.size());
        for (const MLPStudent& s : students) logits.push_back(mlp_infer(s, rows));
        return accuracy(combine_for_eval(logits, alphas), labels);
    };

    TrainReport report;
    report.config_echo = cfg.to_json();
    report.config_echo["method"] = to_string(method);
    auto start = Clock::now();

    BestState best;
    if (cfg.max_epochs == 0) {
        snapshot(best, students, current_alphas, eval_acc(val_features, val_labels, current_alphas), -1);
    }

    int since_best = 0;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        if (method == DistillMethod::adagmlp && cfg.rc_enabled && cfg.rc_resample_per_epoch) {
            subsets = ce_subsets(in, cfg, method, k, run_seed, epoch);
            subset_labels.clear();
            for (const auto& subset : subsets) {
                subset_labels.push_back(gather_labels(in.labels, subset));
            }
        }

        Tape tape;
        std::vector<ForwardTrace> traces;
        std::vector<DropoutRecord> dropout_records(static_cast<size_t>(k));
        traces.reserve(static_cast<size_t>(k));
        for (int i = 0; i < k; ++i) {
            traces.push_back(mlp_forward(tape, in.features, students[static_cast<size_t>(i)],
                                         true, &dropout_rngs[static_cast<size_t>(i)],
                                         use_na && cfg.na_shared_dropout
                                             ? &dropout_records[static_cast<size_t>(i)]
                                             : nullptr));
        }

        // KD-SAMME cascade: stage k's KL uses the weights in force when the
        // stage was reached; the update feeds stage k+1 within this epoch.
        std::vector<NodeWeights> stage_weights;
        stage_weights.reserve(static_cast<size_t>(k));
        if (use_cascade) {
            for (int i = 0; i < k; ++i) {
                DivergenceVector d = divergence(in.teacher_logits,
                                                tape.value(traces[static_cast<size_t>(i)].logits));
                real err = weighted_error(node_weights, d, static_cast<real>(cfg.beta));
                real alpha = combining_weight(err);
                current_alphas[static_cast<size_t>(i)] = alpha;
                stage_weights.push_back(node_weights);
                node_weights = update_weights(node_weights, alpha, d, static_cast<real>(cfg.beta));
            }
        } else {
            for (int i = 0; i < k; ++i) stage_weights.push_back(NodeWeights::uniform(universe));
        }

        LossValue total;
        if (method == DistillMethod::glnn) {
            total = g2m_loss(tape, traces[0].logits, in.train, in.labels, in.teacher_logits,
                             static_cast<real>(cfg.tau), static_cast<real>(cfg.lambda),
                             cfg.sweep_mode);
        } else if (method == DistillMethod::mlp_only) {
            total = ce_loss(tape, gather_rows(traces[0].logits, in.train),
                            gather_labels(in.labels, in.train));
        } else if (method == DistillMethod::bagging || method == DistillMethod::ensemble) {
            Value sum;
            std::vector<std::pair<std::string, double>> terms;
            for (int i = 0; i < k; ++i) {
                LossValue g2m = g2m_loss(tape, traces[static_cast<size_t>(i)].logits,
                                         subsets[static_cast<size_t>(i)], in.labels,
                                         in.teacher_logits, static_cast<real>(cfg.tau),
                                         static_cast<real>(cfg.lambda), cfg.sweep_mode);
                terms.emplace_back("g2m_" + std::to_string(i), g2m.value());
                sum = i == 0 ? g2m.node : add(sum, g2m.node);
            }
            total.node = scale(sum, real(1) / static_cast<real>(k));
            total.breakdown = {{"total", static_cast<double>(tape.value(total.node).item())}};
            total.breakdown.insert(total.breakdown.end(), terms.begin(), terms.end());
        } else { // adagmlp
            std::vector<Value> subset_logits;
            for (int i = 0; i < k; ++i) {
                subset_logits.push_back(gather_rows(traces[static_cast<size_t>(i)].logits,
                                                    subsets[static_cast<size_t>(i)]));
            }
            LossValue rc = rc_loss(tape, subset_logits, subset_labels);
            LossValue adakd = adakd_loss(tape, in.teacher_logits,
                                         [&] {
                                             std::vector<Value> logits;
                                             for (auto& t : traces) logits.push_back(t.logits);
                                             return logits;
                                         }(),
                                         static_cast<real>(cfg.tau), stage_weights);
            LossValue na;
            bool have_na = false;
            if (use_na) {
                std::vector<Value> clean_logits, masked_logits;
                std::vector<std::vector<Value>> clean_hidden, masked_hidden;
                for (int i = 0; i < k; ++i) {
                    const auto& subset = subsets[static_cast<size_t>(i)];
                    Tensor subset_rows = gather_feature_rows(in.features, subset);
                    Tensor masked = mask_features(subset_rows, cfg.rho,
                                                  mask_rngs[static_cast<size_t>(i)]);
                    ForwardTrace masked_trace;
                    if (cfg.na_shared_dropout) {
                        DropoutRecord preset =
                            dropout_records[static_cast<size_t>(i)].gather_rows(subset);
                        masked_trace = mlp_forward(tape, masked, students[static_cast<size_t>(i)],
                                                   true, nullptr, nullptr, &preset);
                    } else {
                        masked_trace = mlp_forward(tape, masked, students[static_cast<size_t>(i)],
                                                   true, &na_dropout_rngs[static_cast<size_t>(i)]);
                    }
                    clean_logits.push_back(gather_rows(traces[static_cast<size_t>(i)].logits,
                                                       subset));
                    masked_logits.push_back(masked_trace.logits);
                    std::vector<Value> ch, mh;
                    for (size_t l = 0; l < traces[static_cast<size_t>(i)].hidden.size(); ++l) {
                        ch.push_back(gather_rows(traces[static_cast<size_t>(i)].hidden[l], subset));
                        mh.push_back(masked_trace.hidden[l]);
                    }
                    clean_hidden.push_back(std::move(ch));
                    masked_hidden.push_back(std::move(mh));
                }
                LossValue na_o, na_h;
                bool have_o = cfg.na_o_enabled, have_h = cfg.na_h_enabled;
                if (have_o) na_o = na_output_loss(tape, clean_logits, masked_logits);
                if (have_h) na_h = na_hidden_loss(tape, clean_hidden, masked_hidden);
                na = na_loss(tape, have_o ? &na_o : nullptr, have_h ? &na_h : nullptr,
                             static_cast<real>(cfg.lambda_na), cfg.sweep_mode);
                have_na = true;
            }
            total = adagmlp_loss(tape, rc, adakd, have_na ? &na : nullptr,
                                 static_cast<real>(cfg.lambda), cfg.sweep_mode);
        }

        double loss_value = total.value();
        check_finite_loss(loss_value, epoch);
        check_nonnegative_terms(total.breakdown, epoch);
        tape.backward(total.node);
        optimizer.step(all_params, tape);

        double val_acc = eval_acc(val_features, val_labels, current_alphas);
        report.epochs.push_back({epoch, total.breakdown, val_acc});
        if (val_acc >= best.val_acc) {
            bool strict = val_acc > best.val_acc;
            snapshot(best, students, current_alphas, val_acc, epoch);
            if (strict) since_best = 0;
            else if (++since_best > cfg.patience) break;
        } else if (++since_best > cfg.patience) {
            break;
        }
    }

    restore(best, students);
    report.best_epoch = best.epoch;
    report.best_val_acc = best.val_acc;
    report.train_ms = ms_since(start);

    DistillResult result;
    result.checkpoint.students = std::move(students);
    result.checkpoint.weights = normalize_alphas(best.alphas);
    result.checkpoint.config = cfg;
    result.checkpoint.method = to_string(method);
    result.checkpoint.seed = run_seed;
    result.checkpoint.best_epoch = best.epoch;
    result.checkpoint.val_acc = best.val_acc;
    if (!in.test_labels.empty()) {
        std::vector<int> preds = ensemble_infer(result.checkpoint, in.test_features,
                                                default_combine_mode(result.checkpoint));
        report.test_acc = accuracy(preds, in.test_labels);
    }
    result.checkpoint.test_acc = report.test_acc;
    result.report = std::move(report);
    return result;
}

DistillResult distill_adagmlp(const Dataset& ds, const TeacherCheckpoint& teacher,
                              const DistillConfig& cfg) {
    return distill(ds, teacher, cfg, DistillMethod::adagmlp);
}

DistillResult distill_glnn(const Dataset& ds, const TeacherCheckpoint& teacher,
                           const DistillConfig& cfg) {
    return distill(ds, teacher, cfg, DistillMethod::glnn);
}

DistillResult distill_bagging(const Dataset& ds, const TeacherCheckpoint& teacher,
                              const DistillConfig& cfg) {
    return distill(ds, teacher, cfg, DistillMethod::bagging);
}

} // namespace gdistill
