#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sce/checkpoint.hpp"
#include "sce/config.hpp"
#include "sce/data.hpp"
#include "sce/eval.hpp"
#include "sce/kernels.hpp"
#include "sce/svg.hpp"
#include "sce/trainer.hpp"
#include "sce/verify.hpp"

namespace {

using namespace sce;

// Split "a,b,c" into tokens.
std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

TrainConfig load_config(const std::string& path) {
    TrainConfig cfg = path.empty() ? TrainConfig{} : parse_config(path);
    apply_env_overrides(cfg);
    cfg.validate();
    return cfg;
}

// Deterministic 80/20 split used when eval gets a single dataset.
void split_dataset(const Dataset& ds, Dataset& train, Dataset& test) {
    train = ds;
    test = ds;
    train.images.clear();
    train.clips.clear();
    train.labels.clear();
    test.images.clear();
    test.clips.clear();
    test.labels.clear();
    const size_t n = ds.size();
    for (size_t i = 0; i < n; ++i) {
        const bool is_test = i % 5 == 4;
        Dataset& dst = is_test ? test : train;
        if (ds.is_video())
            dst.clips.push_back(ds.clips[i]);
        else
            dst.images.push_back(ds.images[i]);
        dst.labels.push_back(ds.labels[i]);
    }
}

int cmd_pretrain(const std::string& config_path, const std::string& data_spec,
                 const std::string& out_dir, const std::string& resume) {
    TrainConfig cfg = load_config(config_path);
    Dataset ds = load_data_spec(data_spec);
    TrainResult res = train_run(cfg, ds, out_dir, resume);
    std::printf("pretrain: %zu steps, final loss %.6f\n", res.metrics.size(),
                res.metrics.empty() ? 0.0 : res.metrics.back().loss);
    std::printf("  metrics:    %s\n", res.metrics_path.c_str());
    std::printf("  checkpoint: %s\n", res.checkpoint_path.c_str());
    std::printf("  manifest:   %s\n", res.manifest_path.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_spec,
             const std::string& test_spec, const std::string& probe, int k, int epochs, double lr,
             const std::string& out_csv) {
    TrainingState st = load_checkpoint(checkpoint);
    kernels::set_threads(st.config.threads);
    Dataset train, test;
    if (test_spec.empty()) {
        Dataset all = load_data_spec(data_spec);
        split_dataset(all, train, test);
    } else {
        train = load_data_spec(data_spec);
        test = load_data_spec(test_spec);
    }
    FeatureBank train_bank = extract_features(st.model, train, st.config, Branch::online);
    FeatureBank test_bank = extract_features(st.model, test, st.config, Branch::online);

    CsvTable table;
    table.header = {"metric", "value"};
    if (probe == "knn") {
        const double acc = knn_classify(train_bank, test_bank, k);
        std::printf("knn(k=%d) accuracy: %.4f\n", k, acc);
        table.rows.push_back({"knn_acc", format_double(acc)});
    } else if (probe == "linear") {
        const double acc = linear_probe(train_bank, test_bank, epochs, lr, st.config.seed);
        std::printf("linear probe accuracy (%d epochs, lr %.3f): %.4f\n", epochs, lr, acc);
        table.rows.push_back({"probe_acc", format_double(acc)});
    } else if (probe == "retrieval") {
        auto recalls = retrieval_recall(train_bank, test_bank, {1, 5, 10});
        for (const auto& [n, r] : recalls) {
            std::printf("R@%d: %.4f\n", n, r);
            table.rows.push_back({"recall@" + std::to_string(n), format_double(r)});
        }
    } else {
        std::fprintf(stderr, "unknown probe '%s' (knn|linear|retrieval)\n", probe.c_str());
        return 2;
    }
    const double fstd = feature_std(test_bank);
    std::printf("feature_std: %.6f\n", fstd);
    table.rows.push_back({"feature_std", format_double(fstd)});
    if (!out_csv.empty()) write_csv(out_csv, table);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis_name,
              const std::string& values_csv, const std::string& data_spec,
              const std::string& test_spec, const std::string& out_dir) {
    TrainConfig cfg = load_config(config_path);
    SweepAxis axis = sweep_axis_from_string(axis_name);
    std::vector<std::string> values = split_list(values_csv);
    Dataset train, test;
    if (test_spec.empty()) {
        Dataset all = load_data_spec(data_spec);
        split_dataset(all, train, test);
    } else {
        train = load_data_spec(data_spec);
        test = load_data_spec(test_spec);
    }
    std::vector<SweepRow> rows = sweep(cfg, axis, values, train, test, out_dir);
    std::printf("%-16s %8s %10s %12s\n", "value", "knn", "probe", "feature_std");
    for (const SweepRow& r : rows)
        std::printf("%-16s %8.4f %10.4f %12.6f\n", r.value.c_str(), r.knn_acc, r.probe_acc,
                    r.feature_std);
    std::printf("summary: %s/summary.csv\n", out_dir.c_str());
    return 0;
}

int cmd_verify() {
    const std::vector<CheckResult> results = run_verify();
    bool all_ok = true;
    for (const CheckResult& r : results) {
        std::printf("[%s] %s: %s\n", r.ok ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
        all_ok = all_ok && r.ok;
    }
    return all_ok ? 0 : 1;
}

int cmd_plot(const std::string& metrics, const std::string& out,
             const std::string& columns_csv) {
    std::vector<std::string> columns;
    if (!columns_csv.empty()) columns = split_list(columns_csv);
    plot_metrics_svg(metrics, out, columns);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Soft contrastive pretraining, evaluation, and verification"};
    app.require_subcommand(1);

    std::string config_path, data_spec, test_spec, out_dir = "runs/out", resume;
    auto* pre = app.add_subcommand("pretrain", "Run self-supervised pretraining");
    pre->add_option("--config", config_path, "Config file (key = value lines)")->required();
    pre->add_option("--data", data_spec, "Dataset spec")->required();
    pre->add_option("--out", out_dir, "Output directory");
    pre->add_option("--resume", resume, "Checkpoint to resume from");

    std::string checkpoint, probe = "knn", eval_out;
    int k = 10, probe_epochs = 40;
    double probe_lr = 0.1;
    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint with a frozen-feature probe");
    ev->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
    ev->add_option("--data", data_spec, "Dataset spec (split 80/20 unless --test-data)")->required();
    ev->add_option("--test-data", test_spec, "Separate test dataset spec");
    ev->add_option("--probe", probe, "knn|linear|retrieval");
    ev->add_option("--k", k, "Neighbours for the knn probe");
    ev->add_option("--epochs", probe_epochs, "Linear probe epochs");
    ev->add_option("--lr", probe_lr, "Linear probe learning rate");
    ev->add_option("--out", eval_out, "Optional results CSV path");

    std::string axis, values;
    auto* sw = app.add_subcommand("sweep", "Pretrain once per value of one hyperparameter");
    sw->add_option("--config", config_path, "Config template")->required();
    sw->add_option("--axis", axis, "lambda|tau_m|augmentation")->required();
    sw->add_option("--values", values, "Comma-separated values")->required();
    sw->add_option("--data", data_spec, "Dataset spec")->required();
    sw->add_option("--test-data", test_spec, "Separate test dataset spec");
    sw->add_option("--out", out_dir, "Output directory");

    app.add_subcommand("verify", "Run the identity/gradient/property self-checks");

    std::string metrics_csv, svg_out = "metrics.svg", plot_columns;
    auto* pl = app.add_subcommand("plot", "Render metric curves to a standalone SVG");
    pl->add_option("--metrics", metrics_csv, "Metrics CSV from pretrain")->required();
    pl->add_option("--out", svg_out, "Output SVG path");
    pl->add_option("--columns", plot_columns, "Comma-separated column names");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return 0;  // --help
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand("pretrain")) return cmd_pretrain(config_path, data_spec, out_dir, resume);
        if (app.got_subcommand("eval"))
            return cmd_eval(checkpoint, data_spec, test_spec, probe, k, probe_epochs, probe_lr,
                            eval_out);
        if (app.got_subcommand("sweep"))
            return cmd_sweep(config_path, axis, values, data_spec, test_spec, out_dir);
        if (app.got_subcommand("verify")) return cmd_verify();
        if (app.got_subcommand("plot")) return cmd_plot(metrics_csv, svg_out, plot_columns);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
