#include "sce/eval.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "sce/kernels.hpp"
#include "sce/metrics.hpp"
#include "sce/rng.hpp"
#include "sce/trainer.hpp"

namespace sce {

void FeatureBank::validate() const {
    SCE_CHECK(features.ndim() == 2 && features.rows() > 0, "feature bank is empty");
    SCE_CHECK(static_cast<long>(labels.size()) == features.rows(),
              "feature bank: labels/features size mismatch");
}

FeatureBank extract_features(const SiameseModel& model, const Dataset& ds, const TrainConfig& cfg,
                             Branch branch) {
    ds.validate();
    FeatureBank bank;
    bank.labels = ds.labels;
    const size_t n = ds.size();
    std::vector<Tensor> chunks;
    for (size_t off = 0; off < n; off += static_cast<size_t>(cfg.batch_size)) {
        const size_t hi = std::min(n, off + static_cast<size_t>(cfg.batch_size));
        std::vector<size_t> idx(hi - off);
        std::iota(idx.begin(), idx.end(), off);
        Tensor x = eval_batch(ds, idx, cfg);
        chunks.push_back(encoder_features(model, x, branch));
    }
    Tensor all = chunks[0];
    for (size_t i = 1; i < chunks.size(); ++i) {
        Tensor merged = Tensor::zeros({all.rows() + chunks[i].rows(), all.cols()});
        std::copy(all.data.begin(), all.data.end(), merged.data.begin());
        std::copy(chunks[i].data.begin(), chunks[i].data.end(),
                  merged.data.begin() + all.numel());
        all = std::move(merged);
    }
    bank.features = std::move(all);
    bank.validate();
    return bank;
}

namespace {

// Similarity of every test row against every train row.
Tensor similarity_matrix(const FeatureBank& train, const FeatureBank& test) {
    Tensor sims = Tensor::zeros({test.size(), train.size()});
    kernels::matmul_nt(test.features.data.data(), train.features.data.data(), sims.data.data(),
                       static_cast<size_t>(test.size()), static_cast<size_t>(test.features.cols()),
                       static_cast<size_t>(train.size()));
    return sims;
}

std::vector<long> top_n_indices(const Tensor& sims, long row, long n, long skip = -1) {
    std::vector<long> idx(static_cast<size_t>(sims.cols()));
    std::iota(idx.begin(), idx.end(), 0);
    if (skip >= 0) idx.erase(idx.begin() + skip);
    const long take = std::min<long>(n, static_cast<long>(idx.size()));
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(), [&](long a, long b) {
        if (sims.at(row, a) != sims.at(row, b)) return sims.at(row, a) > sims.at(row, b);
        return a < b;  // deterministic tie order
    });
    idx.resize(static_cast<size_t>(take));
    return idx;
}

}  // namespace

double knn_classify(const FeatureBank& train, const FeatureBank& test, int k, bool exclude_self) {
    train.validate();
    test.validate();
    SCE_CHECK(k >= 1 && k <= train.size() - (exclude_self ? 1 : 0),
              "knn_classify: k = ", k, " exceeds usable train size");
    SCE_CHECK(train.features.cols() == test.features.cols(), "knn_classify: feature dims differ");
    Tensor sims = similarity_matrix(train, test);
    long correct = 0;
    const int classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
    for (long i = 0; i < test.size(); ++i) {
        std::vector<long> nn = top_n_indices(sims, i, k, exclude_self ? i : -1);
        std::vector<long> votes(static_cast<size_t>(classes), 0);
        std::vector<double> mass(static_cast<size_t>(classes), 0.0);
        for (long j : nn) {
            votes[static_cast<size_t>(train.labels[static_cast<size_t>(j)])]++;
            mass[static_cast<size_t>(train.labels[static_cast<size_t>(j)])] += sims.at(i, j);
        }
        long best = 0;
        for (long c = 1; c < classes; ++c) {
            if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]))
                best = c;
        }
        if (best == test.labels[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

double linear_probe(const FeatureBank& train, const FeatureBank& test, int epochs, double lr,
                    uint64_t seed) {
    train.validate();
    test.validate();
    SCE_CHECK(epochs >= 0, "linear_probe: epochs must be non-negative");
    const long d = train.features.cols();
    const int classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
    Tensor w = Tensor::zeros({d, classes});
    Tensor b = Tensor::zeros({1, classes});
    Tensor vw = Tensor::zeros({d, classes});
    Tensor vb = Tensor::zeros({1, classes});

    const long batch = 128;
    const size_t n = static_cast<size_t>(train.size());
    const long spe = static_cast<long>((n + batch - 1) / static_cast<size_t>(batch));
    const long total = spe * epochs;
    long step = 0;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = Rng(seed).child("probe-shuffle", epoch);
        shuffle_rng.shuffle(order);
        for (long bi = 0; bi < spe; ++bi) {
            const size_t lo = static_cast<size_t>(bi) * static_cast<size_t>(batch);
            const size_t hi = std::min(n, lo + static_cast<size_t>(batch));
            const long bs = static_cast<long>(hi - lo);
            Tensor x = Tensor::zeros({bs, d});
            for (long r = 0; r < bs; ++r)
                for (long j = 0; j < d; ++j)
                    x.at(r, j) = train.features.at(static_cast<long>(order[lo + static_cast<size_t>(r)]), j);
            Tensor logits = ops::add_bias(ops::matmul(x, w), b);
            Tensor p = ops::softmax_rows(logits);
            if (!std::isfinite(p.data[0]))
                throw ContractViolation("linear_probe diverged (NaN probabilities)");
            // d(ce)/dlogits = (p - onehot)/bs
            Tensor dlogits = p;
            for (long r = 0; r < bs; ++r)
                dlogits.at(r, train.labels[order[lo + static_cast<size_t>(r)]]) -= 1.0;
            for (double& v : dlogits.data) v /= static_cast<double>(bs);
            Tensor dw = Tensor::zeros({d, classes});
            kernels::matmul_tn_acc(x.data.data(), dlogits.data.data(), dw.data.data(),
                                   static_cast<size_t>(bs), static_cast<size_t>(d),
                                   static_cast<size_t>(classes));
            const double step_lr =
                total <= 1 ? lr
                           : lr * 0.5 *
                                 (1.0 + std::cos(3.14159265358979323846 * static_cast<double>(step) /
                                                 static_cast<double>(total - 1)));
            for (long j = 0; j < d * classes; ++j) {
                vw.data[static_cast<size_t>(j)] =
                    0.9 * vw.data[static_cast<size_t>(j)] + dw.data[static_cast<size_t>(j)];
                w.data[static_cast<size_t>(j)] -= step_lr * vw.data[static_cast<size_t>(j)];
            }
            for (long c = 0; c < classes; ++c) {
                double db = 0.0;
                for (long r = 0; r < bs; ++r) db += dlogits.at(r, c);
                vb.data[static_cast<size_t>(c)] = 0.9 * vb.data[static_cast<size_t>(c)] + db;
                b.data[static_cast<size_t>(c)] -= step_lr * vb.data[static_cast<size_t>(c)];
            }
            ++step;
        }
    }

    Tensor logits = ops::add_bias(ops::matmul(test.features, w), b);
    long correct = 0;
    for (long i = 0; i < test.size(); ++i) {
        long best = 0;
        for (long c = 1; c < classes; ++c)
            if (logits.at(i, c) > logits.at(i, best)) best = c;
        if (best == test.labels[static_cast<size_t>(i)]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

std::map<int, double> retrieval_recall(const FeatureBank& train, const FeatureBank& test,
                                       const std::vector<int>& n_values) {
    train.validate();
    test.validate();
    SCE_CHECK(!n_values.empty(), "retrieval_recall: no N values");
    for (int n : n_values)
        SCE_CHECK(n >= 1 && n <= train.size(), "retrieval_recall: N = ", n,
                  " exceeds train size ", train.size());
    Tensor sims = similarity_matrix(train, test);
    std::map<int, double> out;
    const int n_max = *std::max_element(n_values.begin(), n_values.end());
    std::vector<std::vector<long>> ranked(static_cast<size_t>(test.size()));
    for (long i = 0; i < test.size(); ++i) ranked[static_cast<size_t>(i)] = top_n_indices(sims, i, n_max);
    for (int n : n_values) {
        long hits = 0;
        for (long i = 0; i < test.size(); ++i) {
            const auto& nn = ranked[static_cast<size_t>(i)];
            bool hit = false;
            for (int j = 0; j < n && j < static_cast<int>(nn.size()); ++j)
                if (train.labels[static_cast<size_t>(nn[static_cast<size_t>(j)])] ==
                    test.labels[static_cast<size_t>(i)]) {
                    hit = true;
                    break;
                }
            if (hit) ++hits;
        }
        out[n] = static_cast<double>(hits) / static_cast<double>(test.size());
    }
    return out;
}

double feature_std(const FeatureBank& bank) {
    bank.validate();
    return embedding_std(bank.features);
}

SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "lambda") return SweepAxis::lambda;
    if (s == "tau_m") return SweepAxis::tau_m;
    if (s == "augmentation") return SweepAxis::augmentation;
    throw ConfigError("unknown sweep axis '" + s + "' (lambda|tau_m|augmentation)");
}

std::vector<SweepRow> sweep(const TrainConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values, const Dataset& train,
                            const Dataset& test, const std::string& out_dir) {
    SCE_CHECK(!values.empty(), "sweep: no values given");
    std::filesystem::create_directories(out_dir);
    std::vector<SweepRow> rows;
    for (const std::string& value : values) {
        TrainConfig cfg = base;
        switch (axis) {
            case SweepAxis::lambda:
                cfg.lambda = std::stod(value);
                break;
            case SweepAxis::tau_m:
                cfg.tau_m = std::stod(value);
                break;
            case SweepAxis::augmentation: {
                const auto slash = value.find('/');
                if (slash == std::string::npos)
                    throw ConfigError("augmentation sweep values look like online/target, got '" +
                                      value + "'");
                cfg.aug_online = value.substr(0, slash);
                cfg.aug_target = value.substr(slash + 1);
                break;
            }
        }
        cfg.validate();
        std::string tag = value;
        for (char& c : tag)
            if (c == '/' || c == '.') c = '_';
        const std::string run_dir = out_dir + "/run_" + tag;

        TrainResult tr = train_run(cfg, train, run_dir);
        TrainingState st = load_checkpoint(tr.checkpoint_path);
        FeatureBank train_bank = extract_features(st.model, train, cfg, Branch::online);
        FeatureBank test_bank = extract_features(st.model, test, cfg, Branch::online);
        SweepRow row;
        row.value = value;
        row.knn_acc = knn_classify(train_bank, test_bank, std::min<long>(10, train_bank.size()));
        row.probe_acc = linear_probe(train_bank, test_bank, 20, 0.1, cfg.seed);
        row.feature_std = feature_std(test_bank);
        row.metrics_path = tr.metrics_path;
        rows.push_back(row);
    }

    CsvTable table;
    table.header = {"value", "knn_acc", "probe_acc", "feature_std"};
    for (const SweepRow& r : rows)
        table.rows.push_back({r.value, format_double(r.knn_acc), format_double(r.probe_acc),
                              format_double(r.feature_std)});
    write_csv(out_dir + "/summary.csv", table);
    return rows;
}

}  // namespace sce
