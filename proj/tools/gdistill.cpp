// SPDX-License-Identifier: Apache-2.0
//
// Command-line surface: dataset tooling, teacher training, distillation,
// evaluation, and experiment execution from JSON spec files.
//
// Exit codes: 0 success, 1 runtime/training failure, 2 usage or validation
// failure.

#include "gdistill/checkpoint.hpp"
#include "gdistill/dataset.hpp"
#include "gdistill/error.hpp"
#include "gdistill/harness.hpp"
#include "gdistill/random.hpp"
#include "gdistill/sbm.hpp"
#include "gdistill/splits.hpp"
#include "gdistill/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

namespace {

using namespace gdistill;
using nlohmann::json;

struct DatasetArgs {
    std::string graph, features, labels, split;
    int classes = 0;

    void attach(CLI::App* cmd, bool split_required = false) {
        cmd->add_option("--graph", graph, "graph file (nodes header + src<TAB>dst lines)")
            ->required();
        cmd->add_option("--features", features, "feature matrix (binary GDFM or .csv)")
            ->required();
        cmd->add_option("--labels", labels, "labels CSV (node_id,class_id)")->required();
        auto* s = cmd->add_option("--split", split, "split JSON file");
        if (split_required) s->required();
        cmd->add_option("--classes", classes, "expected class count (validated when given)");
    }

    Dataset load() const {
        return load_dataset(graph, features, labels,
                            split.empty() ? std::nullopt : std::make_optional(split),
                            classes > 0 ? std::make_optional(classes) : std::nullopt);
    }
};

void write_json_file(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path);
    out << j.dump(2) << '\n';
}

int cmd_dataset_validate(const DatasetArgs& args) {
    Dataset ds = args.load();
    std::cout << "dataset OK\n";
    std::cout << "  nodes:       " << ds.num_nodes() << "\n";
    std::cout << "  edges:       " << ds.graph.edge_count() << "\n";
    std::cout << "  features:    " << ds.feature_dim() << " per node\n";
    std::cout << "  classes:     " << ds.num_classes << "\n";
    std::vector<int> per_class(static_cast<size_t>(ds.num_classes), 0);
    for (int label : ds.labels) ++per_class[static_cast<size_t>(label)];
    std::cout << "  class sizes:";
    for (int c : per_class) std::cout << ' ' << c;
    std::cout << "\n";
    if (!ds.split.empty()) {
        std::cout << "  split:       train " << ds.split.train.size() << ", val "
                  << ds.split.val.size() << ", test " << ds.split.test.size();
        if (ds.split.inductive()) {
            std::cout << ", observed " << ds.split.observed->size() << ", unseen "
                      << ds.split.unseen->size();
        }
        std::cout << "\n";
    }
    return 0;
}

int run_experiment_command(const std::string& spec_path, std::string out_prefix,
                           const std::string& format, bool dry_run) {
    ExperimentSpec spec = ExperimentSpec::from_file(spec_path);
    if (dry_run) {
        std::cout << plan_summary(spec);
        return 0;
    }
    if (out_prefix.empty()) out_prefix = spec.name;
    std::vector<MetricRow> rows = run_experiment(spec);
    std::string path = out_prefix + (format == "jsonl" ? ".jsonl" : ".csv");
    emit_report(rows, path, format == "jsonl" ? ReportFormat::jsonl : ReportFormat::csv);
    std::cout << "wrote " << rows.size() << " rows to " << path << "\n";
    std::cout << "summary: " << out_prefix << ".summary.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GNN-to-MLP knowledge distillation toolkit"};
    app.require_subcommand(1);

    // ---- dataset ----------------------------------------------------------
    auto* dataset_cmd = app.add_subcommand("dataset", "dataset tooling");
    dataset_cmd->require_subcommand(1);

    auto* validate_cmd = dataset_cmd->add_subcommand("validate", "check format invariants");
    DatasetArgs validate_args;
    validate_args.attach(validate_cmd);

    auto* synth_cmd = dataset_cmd->add_subcommand("synth", "write a synthetic SBM dataset");
    std::string synth_out;
    std::string synth_preset;
    SbmParams synth_params;
    int split_per_class = 10, split_val = 40, split_test = 100;
    bool no_split = false;
    synth_cmd->add_option("--out", synth_out, "output prefix")->required();
    synth_cmd->add_option("--preset", synth_preset, "named preset (test)");
    synth_cmd->add_option("--classes", synth_params.classes);
    synth_cmd->add_option("--nodes-per-class", synth_params.nodes_per_class);
    synth_cmd->add_option("--p-in", synth_params.p_in);
    synth_cmd->add_option("--p-out", synth_params.p_out);
    synth_cmd->add_option("--feature-dim", synth_params.feature_dim);
    synth_cmd->add_option("--noise", synth_params.feature_noise);
    synth_cmd->add_option("--seed", synth_params.seed);
    synth_cmd->add_option("--split-per-class", split_per_class);
    synth_cmd->add_option("--split-val", split_val);
    synth_cmd->add_option("--split-test", split_test);
    synth_cmd->add_flag("--no-split", no_split, "skip writing a split file");

    // ---- train-teacher ----------------------------------------------------
    auto* teacher_cmd = app.add_subcommand("train-teacher", "train the GCN teacher");
    DatasetArgs teacher_data;
    teacher_data.attach(teacher_cmd, true);
    TeacherConfig teacher_cfg;
    uint64_t teacher_seed = 1;
    std::string teacher_out = "teacher.ckpt", teacher_report;
    teacher_cmd->add_option("--hidden", teacher_cfg.hidden);
    teacher_cmd->add_option("--layers", teacher_cfg.layers);
    teacher_cmd->add_option("--dropout", teacher_cfg.dropout);
    teacher_cmd->add_option("--lr", teacher_cfg.lr);
    teacher_cmd->add_option("--weight-decay", teacher_cfg.weight_decay);
    teacher_cmd->add_option("--epochs", teacher_cfg.max_epochs);
    teacher_cmd->add_option("--patience", teacher_cfg.patience);
    teacher_cmd->add_option("--seed", teacher_seed);
    teacher_cmd->add_option("--out", teacher_out, "checkpoint path");
    teacher_cmd->add_option("--report", teacher_report, "training report JSON path");

    // ---- distill ----------------------------------------------------------
    auto* distill_cmd = app.add_subcommand("distill", "distill the teacher into students");
    DatasetArgs distill_data;
    distill_data.attach(distill_cmd, true);
    std::string distill_method = "adagmlp";
    std::string distill_teacher, distill_out = "students.ckpt", distill_report, config_path;
    DistillConfig distill_cfg;
    distill_cmd->add_option("--method", distill_method, "adagmlp | glnn | bagging")
        ->check(CLI::IsMember({"adagmlp", "glnn", "bagging"}));
    distill_cmd->add_option("--teacher", distill_teacher, "teacher checkpoint")->required();
    distill_cmd->add_option("--config", config_path, "JSON config file (flags override)");
    auto* opt_lambda = distill_cmd->add_option("--lambda", distill_cfg.lambda);
    auto* opt_lambda_na = distill_cmd->add_option("--lambda-na", distill_cfg.lambda_na);
    auto* opt_beta = distill_cmd->add_option("--beta", distill_cfg.beta);
    auto* opt_tau = distill_cmd->add_option("--tau", distill_cfg.tau);
    auto* opt_rho = distill_cmd->add_option("--rho", distill_cfg.rho);
    auto* opt_k = distill_cmd->add_option("-K,--k", distill_cfg.k);
    auto* opt_layers = distill_cmd->add_option("--layers", distill_cfg.layers);
    auto* opt_hidden = distill_cmd->add_option("--hidden", distill_cfg.hidden);
    auto* opt_dropout = distill_cmd->add_option("--dropout", distill_cfg.dropout);
    auto* opt_lr = distill_cmd->add_option("--lr", distill_cfg.lr);
    auto* opt_wd = distill_cmd->add_option("--weight-decay", distill_cfg.weight_decay);
    auto* opt_epochs = distill_cmd->add_option("--epochs", distill_cfg.max_epochs);
    auto* opt_patience = distill_cmd->add_option("--patience", distill_cfg.patience);
    auto* opt_seed = distill_cmd->add_option("--seed", distill_cfg.seed);
    auto* opt_sweep = distill_cmd->add_flag("--sweep-mode", distill_cfg.sweep_mode);
    auto* opt_no_rc = distill_cmd->add_flag("--no-rc", "disable random classification");
    auto* opt_no_adakd = distill_cmd->add_flag("--no-adakd", "disable boosted distillation");
    auto* opt_no_na = distill_cmd->add_flag("--no-na", "disable node alignment");
    auto* opt_no_na_o = distill_cmd->add_flag("--no-na-o", "disable output alignment");
    auto* opt_no_na_h = distill_cmd->add_flag("--no-na-h", "disable hidden alignment");
    distill_cmd->add_option("--out", distill_out, "ensemble checkpoint path");
    distill_cmd->add_option("--report", distill_report, "training report JSON path");

    // ---- eval --------------------------------------------------------------
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    DatasetArgs eval_data;
    eval_data.attach(eval_cmd, true);
    std::string eval_ckpt, eval_mode = "default", eval_json;
    double missing_rate = 0.0;
    uint64_t eval_seed = 1;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "teacher or ensemble checkpoint")
        ->required();
    eval_cmd->add_option("--missing-rate", missing_rate, "mask this fraction of test features");
    eval_cmd->add_option("--mode", eval_mode, "adaboost | average | vote | default")
        ->check(CLI::IsMember({"adaboost", "average", "vote", "default"}));
    eval_cmd->add_option("--seed", eval_seed, "mask sampling seed");
    eval_cmd->add_option("--json", eval_json, "also write metrics as JSON");

    // ---- experiment ---------------------------------------------------------
    auto* experiment_cmd = app.add_subcommand("experiment", "run a JSON experiment spec");
    std::string spec_path, experiment_out, experiment_format = "csv";
    bool dry_run = false;
    experiment_cmd->add_option("spec", spec_path, "experiment spec JSON")->required();
    experiment_cmd->add_option("--out", experiment_out, "output prefix (default: spec name)");
    experiment_cmd->add_option("--format", experiment_format, "csv | jsonl")
        ->check(CLI::IsMember({"csv", "jsonl"}));
    experiment_cmd->add_flag("--dry-run", dry_run, "print the planned run matrix and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*validate_cmd) return cmd_dataset_validate(validate_args);

        if (*synth_cmd) {
            SbmParams params = synth_params;
            if (!synth_preset.empty()) {
                if (synth_preset != "test") throw ConfigError("unknown preset: " + synth_preset);
                params = sbm_test_preset();
            }
            Dataset ds = generate_sbm(params);
            if (!no_split) {
                ds.split = make_transductive_split(ds.labels, ds.num_classes, split_per_class,
                                                   split_val, split_test, params.seed);
            }
            DatasetPaths paths = save_dataset(ds, synth_out);
            std::cout << "wrote " << paths.graph << ", " << paths.features << ", "
                      << paths.labels;
            if (!no_split) std::cout << ", " << paths.split;
            std::cout << "\n";
            std::cout << "nodes " << ds.num_nodes() << ", edges " << ds.graph.edge_count()
                      << ", classes " << ds.num_classes << "\n";
            return 0;
        }

        if (*teacher_cmd) {
            teacher_cfg.validate();
            Dataset ds = teacher_data.load();
            TeacherResult result = train_teacher(ds, teacher_cfg, teacher_seed);
            save_checkpoint(result.checkpoint, teacher_out);
            if (!teacher_report.empty()) write_json_file(result.report.to_json(), teacher_report);
            std::cout << "teacher: best epoch " << result.report.best_epoch << ", val acc "
                      << result.report.best_val_acc << ", test acc " << result.report.test_acc
                      << "\n";
            std::cout << "checkpoint: " << teacher_out << "\n";
            return 0;
        }

        if (*distill_cmd) {
            DistillConfig cfg;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                if (!in) throw IoError("cannot open config: " + config_path);
                json j;
                try {
                    in >> j;
                } catch (const json::exception& e) {
                    throw ParseError(config_path + ": invalid JSON: " + e.what());
                }
                cfg.merge_json(j);
            }
            // flags override file values
            if (opt_lambda->count()) cfg.lambda = distill_cfg.lambda;
            if (opt_lambda_na->count()) cfg.lambda_na = distill_cfg.lambda_na;
            if (opt_beta->count()) cfg.beta = distill_cfg.beta;
            if (opt_tau->count()) cfg.tau = distill_cfg.tau;
            if (opt_rho->count()) cfg.rho = distill_cfg.rho;
            if (opt_k->count()) cfg.k = distill_cfg.k;
            if (opt_layers->count()) cfg.layers = distill_cfg.layers;
            if (opt_hidden->count()) cfg.hidden = distill_cfg.hidden;
            if (opt_dropout->count()) cfg.dropout = distill_cfg.dropout;
            if (opt_lr->count()) cfg.lr = distill_cfg.lr;
            if (opt_wd->count()) cfg.weight_decay = distill_cfg.weight_decay;
            if (opt_epochs->count()) cfg.max_epochs = distill_cfg.max_epochs;
            if (opt_patience->count()) cfg.patience = distill_cfg.patience;
            if (opt_seed->count()) cfg.seed = distill_cfg.seed;
            if (opt_sweep->count()) cfg.sweep_mode = true;
            if (opt_no_rc->count()) cfg.rc_enabled = false;
            if (opt_no_adakd->count()) cfg.adakd_enabled = false;
            if (opt_no_na->count()) cfg.na_enabled = cfg.na_o_enabled = cfg.na_h_enabled = false;
            if (opt_no_na_o->count()) {
                cfg.na_o_enabled = false;
                cfg.na_enabled = cfg.na_h_enabled;
            }
            if (opt_no_na_h->count()) {
                cfg.na_h_enabled = false;
                cfg.na_enabled = cfg.na_o_enabled;
            }
            cfg.validate();
            Dataset ds = distill_data.load();
            TeacherCheckpoint teacher = load_teacher_checkpoint(distill_teacher);
            DistillResult result =
                distill(ds, teacher, cfg, distill_method_from_string(distill_method));
            save_checkpoint(result.checkpoint, distill_out);
            if (!distill_report.empty()) write_json_file(result.report.to_json(), distill_report);
            std::cout << distill_method << ": best epoch " << result.report.best_epoch
                      << ", val acc " << result.report.best_val_acc << ", test acc "
                      << result.report.test_acc << "\n";
            std::cout << "checkpoint: " << distill_out << "\n";
            return 0;
        }

        if (*eval_cmd) {
            Dataset ds = eval_data.load();
            if (ds.split.test.empty()) throw ConfigError("eval: split has no test nodes");
            const std::vector<int>& test_idx =
                ds.split.inductive() ? *ds.split.unseen : ds.split.test;
            Tensor test_rows({static_cast<int64_t>(test_idx.size()), ds.features.cols()});
            for (size_t r = 0; r < test_idx.size(); ++r) {
                const real* src =
                    ds.features.data() + static_cast<int64_t>(test_idx[r]) * ds.features.cols();
                std::copy(src, src + ds.features.cols(),
                          test_rows.data() + static_cast<int64_t>(r) * ds.features.cols());
            }
            if (missing_rate > 0.0) {
                RandomStream rng(derive_seed(eval_seed, "eval_mask"));
                test_rows = mask_features(test_rows, missing_rate, rng);
            }
            std::vector<int> test_labels;
            for (int i : test_idx) test_labels.push_back(ds.labels[static_cast<size_t>(i)]);

            double acc = 0.0;
            std::string kind = checkpoint_kind(eval_ckpt);
            if (kind == "teacher") {
                TeacherCheckpoint teacher = load_teacher_checkpoint(eval_ckpt);
                Dataset masked = ds;
                if (missing_rate > 0.0) {
                    for (size_t r = 0; r < test_idx.size(); ++r) {
                        real* dst = masked.features.data() +
                                    static_cast<int64_t>(test_idx[r]) * masked.features.cols();
                        const real* src =
                            test_rows.data() + static_cast<int64_t>(r) * test_rows.cols();
                        std::copy(src, src + test_rows.cols(), dst);
                    }
                }
                Tensor logits = teacher_logits_full(masked, teacher);
                std::vector<int> preds;
                {
                    Tensor test_logits({static_cast<int64_t>(test_idx.size()), logits.cols()});
                    for (size_t r = 0; r < test_idx.size(); ++r) {
                        const real* src =
                            logits.data() + static_cast<int64_t>(test_idx[r]) * logits.cols();
                        std::copy(src, src + logits.cols(),
                                  test_logits.data() + static_cast<int64_t>(r) * logits.cols());
                    }
                    preds = row_argmax(test_logits);
                }
                acc = accuracy(preds, test_labels);
            } else {
                EnsembleCheckpoint ckpt = load_ensemble_checkpoint(eval_ckpt);
                if (ckpt.students.front().in_dim() != ds.feature_dim()) {
                    throw DimensionError("checkpoint feature width does not match the dataset");
                }
                CombineMode mode = eval_mode == "default" ? default_combine_mode(ckpt)
                                                          : combine_mode_from_string(eval_mode);
                acc = accuracy(ensemble_infer(ckpt, test_rows, mode), test_labels);
            }
            std::cout << "test nodes: " << test_labels.size() << "\n";
            std::cout << "missing rate: " << missing_rate << "\n";
            std::cout << "accuracy: " << acc << "\n";
            if (!eval_json.empty()) {
                write_json_file(json{{"checkpoint", eval_ckpt},
                                     {"kind", kind},
                                     {"missing_rate", missing_rate},
                                     {"test_nodes", test_labels.size()},
                                     {"accuracy", acc}},
                                eval_json);
            }
            return 0;
        }

        if (*experiment_cmd) {
            return run_experiment_command(spec_path, experiment_out, experiment_format, dry_run);
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const DimensionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IndexError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const TrainingError& e) {
        std::cerr << "training error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
