// SPDX-License-Identifier: Apache-2.0

#include "gdistill/harness.hpp"

#include "gdistill/error.hpp"
#include "gdistill/random.hpp"
#include "gdistill/splits.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

namespace gdistill {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

ExperimentKind experiment_kind_from_string(const std::string& s) {
    if (s == "transductive") return ExperimentKind::transductive;
    if (s == "inductive") return ExperimentKind::inductive;
    if (s == "label_rate_sweep") return ExperimentKind::label_rate_sweep;
    if (s == "feature_missing_sweep") return ExperimentKind::feature_missing_sweep;
    if (s == "hyper_sweep") return ExperimentKind::hyper_sweep;
    if (s == "k_sweep") return ExperimentKind::k_sweep;
    if (s == "ablation") return ExperimentKind::ablation;
    if (s == "ensemble_compare") return ExperimentKind::ensemble_compare;
    if (s == "latency_bench") return ExperimentKind::latency_bench;
    throw ConfigError("unknown experiment kind: '" + s +
                      "' (see the spec-file schema in the README)");
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
    case ExperimentKind::transductive: return "transductive";
    case ExperimentKind::inductive: return "inductive";
    case ExperimentKind::label_rate_sweep: return "label_rate_sweep";
    case ExperimentKind::feature_missing_sweep: return "feature_missing_sweep";
    case ExperimentKind::hyper_sweep: return "hyper_sweep";
    case ExperimentKind::k_sweep: return "k_sweep";
    case ExperimentKind::ablation: return "ablation";
    case ExperimentKind::ensemble_compare: return "ensemble_compare";
    case ExperimentKind::latency_bench: return "latency_bench";
    }
    return "?";
}

Dataset DatasetRef::build() const {
    if (synthetic) return generate_sbm(*synthetic);
    if (preset) {
        if (*preset != "test") throw ConfigError("unknown dataset preset: " + *preset);
        return generate_sbm(sbm_test_preset());
    }
    if (!graph || !features || !labels) {
        throw ConfigError("dataset reference needs graph/features/labels paths, a preset, "
                          "or synthetic parameters");
    }
    return load_dataset(*graph, *features, *labels, split);
}

Split SplitSpec::build(const Dataset& ds, uint64_t seed) const {
    if (kind == "file") {
        if (ds.split.empty()) {
            throw ConfigError("split kind 'file' but the dataset shipped no split");
        }
        return ds.split;
    }
    if (kind == "transductive") {
        return make_transductive_split(ds.labels, ds.num_classes, per_class_train, val_size,
                                       test_size, seed);
    }
    if (kind == "label_rate") {
        return make_label_rate_split(ds.labels, rate, val_size, seed);
    }
    if (kind == "inductive") {
        return make_inductive_split(ds.labels, ds.num_classes, unseen_fraction, per_class_train,
                                    val_size, seed);
    }
    throw ConfigError("unknown split kind: " + kind);
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
    ExperimentSpec spec;
    spec.kind = experiment_kind_from_string(j.at("experiment").get<std::string>());
    spec.name = j.value("name", to_string(spec.kind));

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        if (d.contains("preset")) spec.dataset.preset = d.at("preset").get<std::string>();
        if (d.contains("synthetic")) {
            SbmParams p;
            const json& s = d.at("synthetic");
            p.classes = s.value("classes", p.classes);
            p.nodes_per_class = s.value("nodes_per_class", p.nodes_per_class);
            p.p_in = s.value("p_in", p.p_in);
            p.p_out = s.value("p_out", p.p_out);
            p.feature_dim = s.value("feature_dim", p.feature_dim);
            p.feature_noise = s.value("feature_noise", p.feature_noise);
            p.seed = s.value("seed", p.seed);
            spec.dataset.synthetic = p;
        }
        if (d.contains("graph")) spec.dataset.graph = d.at("graph").get<std::string>();
        if (d.contains("features")) spec.dataset.features = d.at("features").get<std::string>();
        if (d.contains("labels")) spec.dataset.labels = d.at("labels").get<std::string>();
        if (d.contains("split")) spec.dataset.split = d.at("split").get<std::string>();
    }
    if (j.contains("split")) {
        const json& s = j.at("split");
        spec.split.kind = s.value("kind", spec.split.kind);
        spec.split.per_class_train = s.value("per_class_train", spec.split.per_class_train);
        spec.split.val_size = s.value("val_size", spec.split.val_size);
        spec.split.test_size = s.value("test_size", spec.split.test_size);
        spec.split.rate = s.value("rate", spec.split.rate);
        spec.split.unseen_fraction = s.value("unseen_fraction", spec.split.unseen_fraction);
    } else if (spec.kind == ExperimentKind::inductive) {
        spec.split.kind = "inductive";
    }
    if (spec.kind == ExperimentKind::inductive && spec.split.kind == "transductive") {
        spec.split.kind = "inductive";
    }
    if (j.contains("teacher")) spec.teacher = TeacherConfig::from_json(j.at("teacher"));
    if (j.contains("config")) spec.config.merge_json(j.at("config"));
    if (j.contains("methods")) {
        spec.methods = j.at("methods").get<std::vector<std::string>>();
    }
    if (j.contains("seeds")) spec.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    spec.grid_key = j.value("grid_key", "");
    if (j.contains("grid")) spec.grid = j.at("grid").get<std::vector<double>>();
    if (j.contains("rates")) spec.rates = j.at("rates").get<std::vector<double>>();
    if (j.contains("missing_rates")) {
        spec.missing_rates = j.at("missing_rates").get<std::vector<double>>();
    }
    if (j.contains("k_values")) spec.k_values = j.at("k_values").get<std::vector<int>>();
    if (j.contains("bench")) {
        const json& b = j.at("bench");
        spec.bench.repetitions = b.value("repetitions", spec.bench.repetitions);
        spec.bench.warmups = b.value("warmups", spec.bench.warmups);
        spec.bench.parallel = b.value("parallel", spec.bench.parallel);
        spec.bench.train_students = b.value("train_students", spec.bench.train_students);
        if (b.contains("k_values")) spec.bench.k_values = b.at("k_values").get<std::vector<int>>();
        if (b.contains("hidden_widths")) {
            spec.bench.hidden_widths = b.at("hidden_widths").get<std::vector<int>>();
        }
    }
    spec.validate();
    return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open experiment spec: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": invalid JSON: " + e.what());
    }
    return from_json(j);
}

json ExperimentSpec::to_json() const {
    json j;
    j["experiment"] = to_string(kind);
    j["name"] = name;
    json d;
    if (dataset.preset) d["preset"] = *dataset.preset;
    if (dataset.synthetic) {
        d["synthetic"] = {{"classes", dataset.synthetic->classes},
                          {"nodes_per_class", dataset.synthetic->nodes_per_class},
                          {"p_in", dataset.synthetic->p_in},
                          {"p_out", dataset.synthetic->p_out},
                          {"feature_dim", dataset.synthetic->feature_dim},
                          {"feature_noise", dataset.synthetic->feature_noise},
                          {"seed", dataset.synthetic->seed}};
    }
    if (dataset.graph) d["graph"] = *dataset.graph;
    if (dataset.features) d["features"] = *dataset.features;
    if (dataset.labels) d["labels"] = *dataset.labels;
    if (dataset.split) d["split"] = *dataset.split;
    j["dataset"] = d;
    j["split"] = {{"kind", split.kind},
                  {"per_class_train", split.per_class_train},
                  {"val_size", split.val_size},
                  {"test_size", split.test_size},
                  {"rate", split.rate},
                  {"unseen_fraction", split.unseen_fraction}};
    j["teacher"] = teacher.to_json();
    j["config"] = config.to_json();
    j["methods"] = methods;
    j["seeds"] = seeds;
    if (!grid_key.empty()) j["grid_key"] = grid_key;
    if (!grid.empty()) j["grid"] = grid;
    if (!rates.empty()) j["rates"] = rates;
    if (!missing_rates.empty()) j["missing_rates"] = missing_rates;
    if (!k_values.empty()) j["k_values"] = k_values;
    return j;
}

void ExperimentSpec::validate() const {
    if (seeds.empty()) throw ConfigError("experiment spec needs at least one seed");
    teacher.validate();
    DistillConfig check = config;
    check.validate();
    for (double r : rates) {
        if (!(r > 0.0 && r < 1.0)) throw ConfigError("label rates must lie in (0, 1)");
    }
    for (double r : missing_rates) {
        if (!(r >= 0.0 && r < 1.0)) throw ConfigError("missing rates must lie in [0, 1)");
    }
    for (int k : k_values) {
        if (k < 1) throw ConfigError("k values must be >= 1");
    }
    if (kind == ExperimentKind::hyper_sweep && grid_key.empty()) {
        throw ConfigError("hyper_sweep needs a grid_key");
    }
}

int worker_count(size_t jobs) {
    int limit = static_cast<int>(std::thread::hardware_concurrency());
    if (limit <= 0) limit = 1;
    if (const char* env = std::getenv("GDB_THREADS")) {
        int requested = std::atoi(env);
        if (requested > 0) limit = requested;
    }
    return std::max(1, std::min<int>(limit, static_cast<int>(jobs)));
}

namespace {

/// Index-parallel job runner; each job owns its slot, merge order is fixed.
void parallel_jobs(size_t n, const std::function<void(size_t)>& fn) {
    int workers = worker_count(n);
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

struct SeedContext {
    Dataset ds;
    TeacherResult teacher;
};

SeedContext make_seed_context(const ExperimentSpec& spec, uint64_t seed) {
    SeedContext ctx{spec.dataset.build(), {}};
    ctx.ds.split = spec.split.build(ctx.ds, seed);
    ctx.ds.validate();
    ctx.teacher = train_teacher(ctx.ds, spec.teacher, derive_seed(seed, "teacher"));
    return ctx;
}

Tensor eval_feature_rows(const Dataset& ds) {
    const std::vector<int>& idx = ds.split.inductive() ? *ds.split.unseen : ds.split.test;
    Tensor out({static_cast<int64_t>(idx.size()), ds.features.cols()});
    for (size_t r = 0; r < idx.size(); ++r) {
        const real* src = ds.features.data() + static_cast<int64_t>(idx[r]) * ds.features.cols();
        std::copy(src, src + ds.features.cols(),
                  out.data() + static_cast<int64_t>(r) * ds.features.cols());
    }
    return out;
}

std::vector<int> eval_label_rows(const Dataset& ds) {
    const std::vector<int>& idx = ds.split.inductive() ? *ds.split.unseen : ds.split.test;
    std::vector<int> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(ds.labels[static_cast<size_t>(i)]);
    return out;
}

double timed_teacher_infer_ms(const Dataset& ds, const TeacherCheckpoint& teacher) {
    auto start = Clock::now();
    Tensor logits = teacher_logits_full(ds, teacher);
    (void)logits;
    return ms_since(start);
}

/// One student-method run: distill, evaluate, time inference.
MetricRow student_row(const ExperimentSpec& spec, const SeedContext& ctx, uint64_t seed,
                      const std::string& method_name, DistillMethod method,
                      const DistillConfig& cfg, CombineMode eval_mode,
                      const DistillResult* shared = nullptr) {
    DistillResult local;
    const DistillResult* result = shared;
    if (result == nullptr) {
        local = distill(ctx.ds, ctx.teacher.checkpoint, cfg, method);
        result = &local;
    }
    Tensor test_rows = eval_feature_rows(ctx.ds);
    auto start = Clock::now();
    std::vector<int> preds = ensemble_infer(result->checkpoint, test_rows, eval_mode);
    double infer_ms = ms_since(start);
    MetricRow row;
    row.experiment = spec.name;
    row.method = method_name;
    row.seed = seed;
    row.test_acc = accuracy(preds, eval_label_rows(ctx.ds));
    row.val_acc = result->report.best_val_acc;
    row.train_ms = result->report.train_ms;
    row.infer_ms = infer_ms;
    return row;
}

std::vector<std::string> methods_or_default(const ExperimentSpec& spec,
                                            std::vector<std::string> defaults) {
    return spec.methods.empty() ? std::move(defaults) : spec.methods;
}

} // namespace

std::vector<MetricRow> run_classification(const ExperimentSpec& spec) {
    std::vector<std::string> methods =
        methods_or_default(spec, {"teacher_only", "mlp_only", "glnn", "adagmlp"});
    std::vector<std::vector<MetricRow>> buckets(spec.seeds.size());
    parallel_jobs(spec.seeds.size(), [&](size_t si) {
        uint64_t seed = spec.seeds[si];
        SeedContext ctx = make_seed_context(spec, seed);
        DistillConfig cfg = spec.config;
        cfg.seed = seed;
        // average and vote evaluate the same plain-ensemble training run
        std::optional<DistillResult> plain_ensemble;
        auto plain = [&]() -> const DistillResult& {
            if (!plain_ensemble) {
                plain_ensemble = distill(ctx.ds, ctx.teacher.checkpoint, cfg,
                                         DistillMethod::ensemble);
            }
            return *plain_ensemble;
        };
        for (const std::string& m : methods) {
            if (m == "teacher_only") {
                MetricRow row;
                row.experiment = spec.name;
                row.method = m;
                row.seed = seed;
                row.test_acc = ctx.teacher.report.test_acc;
                row.val_acc = ctx.teacher.report.best_val_acc;
                row.train_ms = ctx.teacher.report.train_ms;
                row.infer_ms = timed_teacher_infer_ms(ctx.ds, ctx.teacher.checkpoint);
                buckets[si].push_back(row);
            } else if (m == "adagmlp") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::adagmlp,
                                                  cfg, CombineMode::adaboost));
            } else if (m == "glnn") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::glnn, cfg,
                                                  CombineMode::average));
            } else if (m == "mlp_only") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::mlp_only,
                                                  cfg, CombineMode::average));
            } else if (m == "bagging") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::bagging,
                                                  cfg, CombineMode::average));
            } else if (m == "average") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::ensemble,
                                                  cfg, CombineMode::average, &plain()));
            } else if (m == "vote") {
                buckets[si].push_back(student_row(spec, ctx, seed, m, DistillMethod::ensemble,
                                                  cfg, CombineMode::vote, &plain()));
            } else {
                throw ConfigError("unknown method: " + m);
            }
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

std::vector<MetricRow> sweep_label_rate(const ExperimentSpec& spec) {
    std::vector<std::string> methods = methods_or_default(spec, {"glnn", "adagmlp"});
    struct Job {
        double rate;
        uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double rate : spec.rates) {
        for (uint64_t seed : spec.seeds) jobs.push_back({rate, seed});
    }
    std::vector<std::vector<MetricRow>> buckets(jobs.size());
    parallel_jobs(jobs.size(), [&](size_t ji) {
        const Job& job = jobs[ji];
        ExperimentSpec local = spec;
        local.split.kind = "label_rate";
        local.split.rate = job.rate;
        SeedContext ctx = make_seed_context(local, job.seed);
        DistillConfig cfg = spec.config;
        cfg.seed = job.seed;
        for (const std::string& m : methods) {
            MetricRow row;
            if (m == "teacher_only") {
                row.experiment = spec.name;
                row.method = m;
                row.seed = job.seed;
                row.test_acc = ctx.teacher.report.test_acc;
                row.val_acc = ctx.teacher.report.best_val_acc;
                row.train_ms = ctx.teacher.report.train_ms;
                row.infer_ms = timed_teacher_infer_ms(ctx.ds, ctx.teacher.checkpoint);
            } else {
                DistillMethod method = distill_method_from_string(m);
                CombineMode mode = method == DistillMethod::adagmlp ? CombineMode::adaboost
                                                                    : CombineMode::average;
                row = student_row(spec, ctx, job.seed, m, method, cfg, mode);
            }
            row.grid_key = "label_rate";
            row.grid_value = format_number(job.rate);
            buckets[ji].push_back(row);
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

namespace {

/// Features with the evaluation rows masked in place (teacher-side view).
Tensor masked_full_features(const Dataset& ds, double rate, uint64_t seed) {
    Tensor features = ds.features;
    if (rate <= 0.0) return features;
    const std::vector<int>& idx = ds.split.inductive() ? *ds.split.unseen : ds.split.test;
    RandomStream rng(derive_seed(seed, "eval_mask"));
    Tensor rows({static_cast<int64_t>(idx.size()), features.cols()});
    for (size_t r = 0; r < idx.size(); ++r) {
        const real* src = features.data() + static_cast<int64_t>(idx[r]) * features.cols();
        std::copy(src, src + features.cols(), rows.data() + static_cast<int64_t>(r) * features.cols());
    }
    Tensor masked = mask_features(rows, rate, rng);
    for (size_t r = 0; r < idx.size(); ++r) {
        real* dst = features.data() + static_cast<int64_t>(idx[r]) * features.cols();
        const real* src = masked.data() + static_cast<int64_t>(r) * features.cols();
        std::copy(src, src + features.cols(), dst);
    }
    return features;
}

} // namespace

std::vector<MetricRow> sweep_feature_missing(const ExperimentSpec& spec) {
    std::vector<std::string> methods = methods_or_default(spec, {"glnn", "adagmlp"});
    std::vector<std::vector<MetricRow>> buckets(spec.seeds.size());
    parallel_jobs(spec.seeds.size(), [&](size_t si) {
        uint64_t seed = spec.seeds[si];
        SeedContext ctx = make_seed_context(spec, seed); // teacher sees complete features
        const std::vector<int> test_labels = eval_label_rows(ctx.ds);
        const std::vector<int>& test_idx =
            ctx.ds.split.inductive() ? *ctx.ds.split.unseen : ctx.ds.split.test;
        for (size_t ri = 0; ri < spec.missing_rates.size(); ++ri) {
            double rate = spec.missing_rates[ri];
            // identical masked views for every method at this (seed, rate)
            Tensor full_masked = masked_full_features(ctx.ds, rate, derive_seed(seed, "mask", ri));
            Tensor test_rows({static_cast<int64_t>(test_idx.size()), full_masked.cols()});
            for (size_t r = 0; r < test_idx.size(); ++r) {
                const real* src =
                    full_masked.data() + static_cast<int64_t>(test_idx[r]) * full_masked.cols();
                std::copy(src, src + full_masked.cols(),
                          test_rows.data() + static_cast<int64_t>(r) * full_masked.cols());
            }
            DistillConfig cfg = spec.config;
            cfg.seed = seed;
            if (rate > 0.0) cfg.rho = rate; // students train against the eval missing rate
            for (const std::string& m : methods) {
                MetricRow row;
                row.experiment = spec.name;
                row.method = m;
                row.seed = seed;
                row.grid_key = "missing_rate";
                row.grid_value = format_number(rate);
                if (m == "teacher_only") {
                    Dataset masked_ds = ctx.ds;
                    masked_ds.features = full_masked;
                    auto start = Clock::now();
                    Tensor logits = teacher_logits_full(masked_ds, ctx.teacher.checkpoint);
                    row.infer_ms = ms_since(start);
                    std::vector<int> preds;
                    {
                        Tensor test_logits({static_cast<int64_t>(test_idx.size()), logits.cols()});
                        for (size_t r = 0; r < test_idx.size(); ++r) {
                            const real* src = logits.data() +
                                              static_cast<int64_t>(test_idx[r]) * logits.cols();
                            std::copy(src, src + logits.cols(),
                                      test_logits.data() +
                                          static_cast<int64_t>(r) * logits.cols());
                        }
                        preds = row_argmax(test_logits);
                    }
                    row.test_acc = accuracy(preds, test_labels);
                    row.val_acc = ctx.teacher.report.best_val_acc;
                    row.train_ms = ctx.teacher.report.train_ms;
                } else {
                    DistillMethod method = distill_method_from_string(m);
                    CombineMode mode = method == DistillMethod::adagmlp ? CombineMode::adaboost
                                                                        : CombineMode::average;
                    DistillResult result = distill(ctx.ds, ctx.teacher.checkpoint, cfg, method);
                    auto start = Clock::now();
                    std::vector<int> preds = ensemble_infer(result.checkpoint, test_rows, mode);
                    row.infer_ms = ms_since(start);
                    row.test_acc = accuracy(preds, test_labels);
                    row.val_acc = result.report.best_val_acc;
                    row.train_ms = result.report.train_ms;
                }
                buckets[si].push_back(row);
            }
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

namespace {

DistillConfig apply_grid_value(DistillConfig cfg, const std::string& key, double value) {
    if (key == "lambda") {
        cfg.lambda = value;
    } else if (key == "lambda_na") {
        cfg.lambda_na = value;
    } else if (key == "beta") {
        cfg.beta = value;
    } else if (key == "tau") {
        cfg.tau = value;
    } else if (key == "rho") {
        cfg.rho = value;
    } else if (key == "hidden") {
        cfg.hidden = static_cast<int>(value);
    } else if (key == "layers") {
        cfg.layers = static_cast<int>(value);
    } else if (key == "k") {
        cfg.k = static_cast<int>(value);
    } else {
        throw ConfigError("unknown grid key: " + key);
    }
    return cfg;
}

} // namespace

std::vector<MetricRow> sweep_hyper(const ExperimentSpec& spec) {
    std::vector<std::string> methods = methods_or_default(spec, {"adagmlp"});
    if (spec.grid.empty()) return {};
    std::vector<std::vector<MetricRow>> buckets(spec.seeds.size());
    parallel_jobs(spec.seeds.size(), [&](size_t si) {
        uint64_t seed = spec.seeds[si];
        SeedContext ctx = make_seed_context(spec, seed);
        for (double value : spec.grid) {
            DistillConfig cfg = apply_grid_value(spec.config, spec.grid_key, value);
            cfg.seed = seed;
            cfg.sweep_mode = true;
            if (spec.grid_key != "lambda_na") {
                // focused sweeps drop the alignment module
                cfg.na_enabled = cfg.na_o_enabled = cfg.na_h_enabled = false;
            }
            for (const std::string& m : methods) {
                DistillMethod method = distill_method_from_string(m);
                CombineMode mode = method == DistillMethod::adagmlp ? CombineMode::adaboost
                                                                    : CombineMode::average;
                MetricRow row = student_row(spec, ctx, seed, m, method, cfg, mode);
                row.grid_key = spec.grid_key;
                row.grid_value = format_number(value);
                buckets[si].push_back(row);
            }
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

std::vector<MetricRow> sweep_k(const ExperimentSpec& spec) {
    std::vector<std::string> methods = methods_or_default(spec, {"adagmlp"});
    std::vector<int> ks = spec.k_values.empty() ? std::vector<int>{2, 3, 4} : spec.k_values;
    std::vector<std::vector<MetricRow>> buckets(spec.seeds.size());
    parallel_jobs(spec.seeds.size(), [&](size_t si) {
        uint64_t seed = spec.seeds[si];
        SeedContext ctx = make_seed_context(spec, seed);
        for (int k : ks) {
            DistillConfig cfg = spec.config;
            cfg.k = k;
            cfg.seed = seed;
            for (const std::string& m : methods) {
                DistillMethod method = distill_method_from_string(m);
                CombineMode mode = method == DistillMethod::adagmlp ? CombineMode::adaboost
                                                                    : CombineMode::average;
                MetricRow row = student_row(spec, ctx, seed, m, method, cfg, mode);
                row.grid_key = "k";
                row.grid_value = std::to_string(k);
                buckets[si].push_back(row);
            }
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

namespace {

DistillConfig ablation_variant(DistillConfig cfg, const std::string& variant) {
    if (variant == "full") return cfg;
    if (variant == "no_rc") {
        cfg.rc_enabled = false;
    } else if (variant == "no_adakd") {
        cfg.adakd_enabled = false;
    } else if (variant == "no_na_o") {
        cfg.na_o_enabled = false;
        cfg.na_enabled = cfg.na_h_enabled;
    } else if (variant == "no_na_h") {
        cfg.na_h_enabled = false;
        cfg.na_enabled = cfg.na_o_enabled;
    } else if (variant == "no_na") {
        cfg.na_o_enabled = cfg.na_h_enabled = cfg.na_enabled = false;
    } else {
        throw ConfigError("unknown ablation variant: " + variant);
    }
    return cfg;
}

} // namespace

std::vector<MetricRow> run_ablation(const ExperimentSpec& spec) {
    const std::vector<std::string> variants = {"full",    "no_rc",   "no_adakd",
                                               "no_na_o", "no_na_h", "no_na"};
    double label_rate = spec.rates.empty() ? 0.05 : spec.rates.front();
    double missing_rate = spec.missing_rates.empty() ? 0.5 : spec.missing_rates.front();
    const std::vector<std::string> protocols = {"label_rate", "feature_missing"};

    std::vector<std::vector<MetricRow>> buckets(spec.seeds.size());
    parallel_jobs(spec.seeds.size(), [&](size_t si) {
        uint64_t seed = spec.seeds[si];
        for (const std::string& protocol : protocols) {
            ExperimentSpec local = spec;
            if (protocol == "label_rate") {
                local.split.kind = "label_rate";
                local.split.rate = label_rate;
            }
            SeedContext ctx = make_seed_context(local, seed);
            Tensor test_rows;
            std::vector<int> test_labels = eval_label_rows(ctx.ds);
            double eval_rate = protocol == "feature_missing" ? missing_rate : 0.0;
            if (eval_rate > 0.0) {
                const std::vector<int>& idx =
                    ctx.ds.split.inductive() ? *ctx.ds.split.unseen : ctx.ds.split.test;
                Tensor full = masked_full_features(ctx.ds, eval_rate, derive_seed(seed, "abl"));
                test_rows = Tensor({static_cast<int64_t>(idx.size()), full.cols()});
                for (size_t r = 0; r < idx.size(); ++r) {
                    const real* src = full.data() + static_cast<int64_t>(idx[r]) * full.cols();
                    std::copy(src, src + full.cols(),
                              test_rows.data() + static_cast<int64_t>(r) * full.cols());
                }
            } else {
                test_rows = eval_feature_rows(ctx.ds);
            }
            for (const std::string& variant : variants) {
                DistillConfig cfg = ablation_variant(spec.config, variant);
                cfg.seed = seed;
                if (eval_rate > 0.0) cfg.rho = eval_rate;
                DistillResult result =
                    distill(ctx.ds, ctx.teacher.checkpoint, cfg, DistillMethod::adagmlp);
                auto start = Clock::now();
                std::vector<int> preds =
                    ensemble_infer(result.checkpoint, test_rows, CombineMode::adaboost);
                MetricRow row;
                row.experiment = spec.name;
                row.method = "adagmlp_" + variant;
                row.grid_key = "protocol";
                row.grid_value = protocol;
                row.seed = seed;
                row.test_acc = accuracy(preds, test_labels);
                row.val_acc = result.report.best_val_acc;
                row.train_ms = result.report.train_ms;
                row.infer_ms = ms_since(start);
                buckets[si].push_back(row);
            }
        }
    });
    std::vector<MetricRow> rows;
    for (auto& b : buckets) rows.insert(rows.end(), b.begin(), b.end());
    return rows;
}

std::vector<MetricRow> run_ensemble_compare(const ExperimentSpec& spec) {
    ExperimentSpec local = spec;
    local.methods = methods_or_default(spec, {"glnn", "average", "vote", "bagging", "adagmlp"});
    if (local.config.k < 2) throw ConfigError("ensemble comparison needs k >= 2");
    return run_classification(local);
}

std::vector<MetricRow> bench_latency(const ExperimentSpec& spec) {
    Dataset ds = spec.dataset.build();
    ds.split = spec.split.build(ds, spec.seeds.front());
    ds.validate();
    const Tensor test_rows = eval_feature_rows(ds);
    const std::vector<int> test_labels = eval_label_rows(ds);
    NormalizedAdjacency adj = normalize_adjacency(ds.graph);

    auto median_ms = [&](const std::function<void()>& fn) {
        for (int i = 0; i < spec.bench.warmups; ++i) fn();
        std::vector<double> times;
        times.reserve(static_cast<size_t>(spec.bench.repetitions));
        for (int i = 0; i < spec.bench.repetitions; ++i) {
            auto start = Clock::now();
            fn();
            times.push_back(ms_since(start));
        }
        std::sort(times.begin(), times.end());
        return times[times.size() / 2];
    };

    std::vector<MetricRow> rows;
    for (int hidden : spec.bench.hidden_widths) {
        TeacherConfig tc = spec.teacher;
        tc.hidden = hidden;
        TeacherCheckpoint teacher;
        double teacher_train_ms = 0.0;
        if (spec.bench.train_students) {
            TeacherResult tr = train_teacher(ds, tc, derive_seed(spec.seeds.front(), "teacher"));
            teacher = std::move(tr.checkpoint);
            teacher_train_ms = tr.report.train_ms;
        } else {
            teacher.model = GCNTeacher::create(ds.feature_dim(), tc.hidden, ds.num_classes,
                                               tc.layers, static_cast<real>(tc.dropout),
                                               derive_seed(spec.seeds.front(), "teacher.init"));
            teacher.config = tc;
        }
        {
            Tensor logits;
            double ms = median_ms([&] { logits = gcn_infer(adj, ds.features, teacher.model); });
            Tensor test_logits({static_cast<int64_t>(ds.split.test.size()), logits.cols()});
            for (size_t r = 0; r < ds.split.test.size(); ++r) {
                const real* src =
                    logits.data() + static_cast<int64_t>(ds.split.test[r]) * logits.cols();
                std::copy(src, src + logits.cols(),
                          test_logits.data() + static_cast<int64_t>(r) * logits.cols());
            }
            MetricRow row;
            row.experiment = spec.name;
            row.method = "teacher_only";
            row.grid_key = "hidden,k";
            row.grid_value = "h" + std::to_string(hidden);
            row.seed = spec.seeds.front();
            row.test_acc = accuracy(row_argmax(test_logits), test_labels);
            row.train_ms = teacher_train_ms;
            row.infer_ms = ms;
            rows.push_back(row);
        }
        for (int k : spec.bench.k_values) {
            DistillConfig cfg = spec.config;
            cfg.hidden = hidden;
            cfg.k = k;
            cfg.seed = spec.seeds.front();
            EnsembleCheckpoint ckpt;
            double train_ms = 0.0;
            if (spec.bench.train_students) {
                DistillResult result = distill(ds, teacher, cfg, DistillMethod::adagmlp);
                ckpt = std::move(result.checkpoint);
                train_ms = result.report.train_ms;
            } else {
                for (int i = 0; i < k; ++i) {
                    ckpt.students.push_back(MLPStudent::create(
                        "mlp" + std::to_string(i), ds.feature_dim(), cfg.hidden, ds.num_classes,
                        cfg.layers, static_cast<real>(cfg.dropout),
                        derive_seed(cfg.seed, "student", static_cast<uint64_t>(i))));
                }
                ckpt.weights = normalize_alphas(std::vector<real>(static_cast<size_t>(k), real(1)));
                ckpt.config = cfg;
                ckpt.method = "adagmlp";
                ckpt.seed = cfg.seed;
            }
            int threads = spec.bench.parallel ? k : 1;
            std::vector<int> preds;
            double ms = median_ms([&] {
                preds = ensemble_infer(ckpt, test_rows, CombineMode::adaboost, threads);
            });
            MetricRow row;
            row.experiment = spec.name;
            row.method = "adagmlp";
            row.grid_key = "hidden,k";
            row.grid_value = "h" + std::to_string(hidden) + "_k" + std::to_string(k);
            row.seed = spec.seeds.front();
            row.test_acc = accuracy(preds, test_labels);
            row.train_ms = train_ms;
            row.infer_ms = ms;
            rows.push_back(row);
        }
    }
    return rows;
}

std::vector<MetricRow> run_experiment(const ExperimentSpec& spec) {
    switch (spec.kind) {
    case ExperimentKind::transductive:
    case ExperimentKind::inductive: return run_classification(spec);
    case ExperimentKind::label_rate_sweep: return sweep_label_rate(spec);
    case ExperimentKind::feature_missing_sweep: return sweep_feature_missing(spec);
    case ExperimentKind::hyper_sweep: return sweep_hyper(spec);
    case ExperimentKind::k_sweep: return sweep_k(spec);
    case ExperimentKind::ablation: return run_ablation(spec);
    case ExperimentKind::ensemble_compare: return run_ensemble_compare(spec);
    case ExperimentKind::latency_bench: return bench_latency(spec);
    }
    throw ConfigError("unhandled experiment kind");
}

std::string plan_summary(const ExperimentSpec& spec) {
    std::ostringstream out;
    out << "experiment: " << to_string(spec.kind) << " (" << spec.name << ")\n";
    out << "seeds: " << spec.seeds.size() << "\n";
    size_t grid = 1;
    switch (spec.kind) {
    case ExperimentKind::label_rate_sweep: grid = spec.rates.size(); break;
    case ExperimentKind::feature_missing_sweep: grid = spec.missing_rates.size(); break;
    case ExperimentKind::hyper_sweep: grid = spec.grid.size(); break;
    case ExperimentKind::k_sweep:
        grid = spec.k_values.empty() ? 3 : spec.k_values.size();
        break;
    case ExperimentKind::ablation: grid = 2; break;
    case ExperimentKind::latency_bench:
        grid = spec.bench.hidden_widths.size() * (1 + spec.bench.k_values.size());
        break;
    default: grid = 1; break;
    }
    size_t methods = spec.methods.size();
    if (methods == 0) {
        switch (spec.kind) {
        case ExperimentKind::ensemble_compare: methods = 5; break;
        case ExperimentKind::ablation: methods = 6; break;
        case ExperimentKind::hyper_sweep:
        case ExperimentKind::k_sweep: methods = 1; break;
        case ExperimentKind::label_rate_sweep:
        case ExperimentKind::feature_missing_sweep: methods = 2; break;
        case ExperimentKind::latency_bench: methods = 1; break;
        default: methods = 4; break;
        }
    }
    out << "planned runs: " << methods << " methods x " << grid << " grid points x "
        << spec.seeds.size() << " seeds = " << methods * grid * spec.seeds.size() << " rows\n";
    out << "workers: " << worker_count(spec.seeds.size() * std::max<size_t>(grid, 1)) << "\n";
    return out.str();
}

// --- reporting ----------------------------------------------------------------

namespace {

constexpr const char* kCsvHeader =
    "experiment,method,grid_key,grid_value,seed,test_acc,val_acc,train_ms,infer_ms";

std::string summary_path_for(const std::string& path) {
    std::string base = path;
    for (const char* ext : {".csv", ".jsonl"}) {
        size_t len = std::string(ext).size();
        if (base.size() > len && base.compare(base.size() - len, len, ext) == 0) {
            base.resize(base.size() - len);
            break;
        }
    }
    return base + ".summary.csv";
}

void write_summary(const std::vector<MetricRow>& rows, const std::string& path) {
    // group by (experiment, method, grid_key, grid_value), order of first appearance
    struct Group {
        std::string experiment, method, grid_key, grid_value;
        std::vector<double> test_acc, val_acc, train_ms, infer_ms;
    };
    std::vector<Group> groups;
    auto find = [&](const MetricRow& r) -> Group& {
        for (Group& g : groups) {
            if (g.experiment == r.experiment && g.method == r.method &&
                g.grid_key == r.grid_key && g.grid_value == r.grid_value) {
                return g;
            }
        }
        groups.push_back(Group{r.experiment, r.method, r.grid_key, r.grid_value, {}, {}, {}, {}});
        return groups.back();
    };
    for (const MetricRow& r : rows) {
        Group& g = find(r);
        g.test_acc.push_back(r.test_acc);
        g.val_acc.push_back(r.val_acc);
        g.train_ms.push_back(r.train_ms);
        g.infer_ms.push_back(r.infer_ms);
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << "experiment,method,grid_key,grid_value,n,test_acc_mean,test_acc_std_pop,"
           "val_acc_mean,val_acc_std_pop,train_ms_mean,infer_ms_mean\n";
    out.precision(10);
    for (const Group& g : groups) {
        auto [tm, ts] = mean_std(g.test_acc);
        auto [vm, vs] = mean_std(g.val_acc);
        auto [trm, _1] = mean_std(g.train_ms);
        auto [im, _2] = mean_std(g.infer_ms);
        out << g.experiment << ',' << g.method << ',' << g.grid_key << ',' << g.grid_value << ','
            << g.test_acc.size() << ',' << tm << ',' << ts << ',' << vm << ',' << vs << ','
            << trm << ',' << im << '\n';
    }
    if (!out) throw IoError("write failed: " + path);
}

} // namespace

std::pair<double, double> mean_std(const std::vector<double>& values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size()); // population
    return {mean, std::sqrt(var)};
}

void emit_report(const std::vector<MetricRow>& rows, const std::string& path,
                 ReportFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.precision(10);
    if (format == ReportFormat::csv) {
        out << kCsvHeader << '\n';
        for (const MetricRow& r : rows) {
            out << r.experiment << ',' << r.method << ',' << r.grid_key << ',' << r.grid_value
                << ',' << r.seed << ',' << r.test_acc << ',' << r.val_acc << ',' << r.train_ms
                << ',' << r.infer_ms << '\n';
        }
    } else {
        for (const MetricRow& r : rows) {
            json j{{"experiment", r.experiment}, {"method", r.method},
                   {"grid_key", r.grid_key},    {"grid_value", r.grid_value},
                   {"seed", r.seed},            {"test_acc", r.test_acc},
                   {"val_acc", r.val_acc},      {"train_ms", r.train_ms},
                   {"infer_ms", r.infer_ms}};
            out << j.dump() << '\n';
        }
    }
    if (!out) throw IoError("write failed: " + path);
    write_summary(rows, summary_path_for(path));
}

std::vector<MetricRow> parse_jsonl_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    std::vector<MetricRow> rows;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(path + ": invalid JSON line: " + e.what(), lineno);
        }
        MetricRow r;
        r.experiment = j.value("experiment", "");
        r.method = j.value("method", "");
        r.grid_key = j.value("grid_key", "");
        r.grid_value = j.value("grid_value", "");
        r.seed = j.value("seed", uint64_t(0));
        r.test_acc = j.value("test_acc", 0.0);
        r.val_acc = j.value("val_acc", 0.0);
        r.train_ms = j.value("train_ms", 0.0);
        r.infer_ms = j.value("infer_ms", 0.0);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace gdistill
