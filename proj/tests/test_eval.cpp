#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "sce/eval.hpp"
#include "sce/trainer.hpp"
#include "test_support.hpp"

using namespace sce;

namespace {

std::string temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(p);
    return p.string();
}

FeatureBank bank_from(Tensor features, std::vector<int> labels) {
    FeatureBank b;
    b.features = std::move(features);
    b.labels = std::move(labels);
    return b;
}

// Exhaustive neighbour enumeration, independent of the library path.
std::vector<long> brute_force_top_n(const FeatureBank& train, const FeatureBank& test, long row,
                                    long n, long skip = -1) {
    std::vector<std::pair<double, long>> scored;
    for (long j = 0; j < train.size(); ++j) {
        if (j == skip) continue;
        double dot = 0.0;
        for (long d = 0; d < train.features.cols(); ++d)
            dot += test.features.at(row, d) * train.features.at(j, d);
        scored.push_back({dot, j});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<long> out;
    for (long i = 0; i < n && i < static_cast<long>(scored.size()); ++i)
        out.push_back(scored[static_cast<size_t>(i)].second);
    return out;
}

}  // namespace

TEST_CASE("knn: duplicated point and separable clusters") {
    Rng rng(3);
    Tensor train_f = testsup::random_unit_rows(10, 6, rng);
    std::vector<int> train_l(10);
    for (int i = 0; i < 10; ++i) train_l[static_cast<size_t>(i)] = i % 2;
    FeatureBank train = bank_from(train_f, train_l);

    // test point duplicated from the train set finds its own label at k=1
    Tensor one = Tensor::zeros({1, 6});
    for (long j = 0; j < 6; ++j) one.at(0, j) = train_f.at(3, j);
    FeatureBank test = bank_from(one, {train_l[3]});
    CHECK(knn_classify(train, test, 1) == 1.0);

    // two orthogonal clusters are perfectly separable at k=1
    Tensor axis = Tensor::zeros({8, 2});
    std::vector<int> labels(8);
    for (long i = 0; i < 8; ++i) {
        axis.at(i, i % 2) = 1.0;
        labels[static_cast<size_t>(i)] = static_cast<int>(i % 2);
    }
    FeatureBank clusters = bank_from(axis, labels);
    CHECK(knn_classify(clusters, clusters, 1) == 1.0);

    CHECK_THROWS_AS(knn_classify(train, test, 0), ContractViolation);
    CHECK_THROWS_AS(knn_classify(train, test, 11), ContractViolation);
}

TEST_CASE("knn at chance level on random labels") {
    Rng rng(17);
    Tensor f = testsup::random_unit_rows(600, 8, rng);
    std::vector<int> labels(600);
    for (auto& l : labels) l = static_cast<int>(rng.uniform_index(4));
    FeatureBank train = bank_from(f, labels);

    Rng rng2(18);
    Tensor ft = testsup::random_unit_rows(400, 8, rng2);
    std::vector<int> lt(400);
    for (auto& l : lt) l = static_cast<int>(rng2.uniform_index(4));
    FeatureBank test = bank_from(ft, lt);

    const double acc = knn_classify(train, test, 10);
    CHECK(acc > 0.25 - 0.05);
    CHECK(acc < 0.25 + 0.05);
}

TEST_CASE("knn leave-one-out equals the brute-force oracle") {
    Rng rng(23);
    Tensor f = testsup::random_unit_rows(40, 5, rng);
    std::vector<int> labels(40);
    for (size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(rng.uniform_index(3));
    FeatureBank bank = bank_from(f, labels);

    const double got = knn_classify(bank, bank, 1, /*exclude_self=*/true);
    long correct = 0;
    for (long i = 0; i < bank.size(); ++i) {
        auto nn = brute_force_top_n(bank, bank, i, 1, i);
        if (bank.labels[static_cast<size_t>(nn[0])] == bank.labels[static_cast<size_t>(i)]) ++correct;
    }
    CHECK(got == doctest::Approx(static_cast<double>(correct) / 40.0).epsilon(1e-12));
}

TEST_CASE("linear probe separates linearly separable data") {
    // two classes along distinct unit directions with small jitter
    Rng rng(31);
    const long n = 200, d = 6;
    Tensor f = Tensor::zeros({n, d});
    std::vector<int> labels(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        const int cls = static_cast<int>(i % 2);
        labels[static_cast<size_t>(i)] = cls;
        for (long j = 0; j < d; ++j) f.at(i, j) = rng.uniform(-0.05, 0.05);
        f.at(i, cls) += 1.0;
    }
    FeatureBank bank = bank_from(ops::l2_normalize_rows(f), labels);
    const double acc = linear_probe(bank, bank, 40, 0.5, 7);
    CHECK(acc >= 0.99);

    // zero-epoch probe scores at chance on balanced classes (tie-break to 0)
    const double untrained = linear_probe(bank, bank, 0, 0.5, 7);
    CHECK(untrained == doctest::Approx(0.5).epsilon(1e-12));

    // deterministic for a fixed seed
    CHECK(linear_probe(bank, bank, 7, 0.5, 9) == linear_probe(bank, bank, 7, 0.5, 9));
}

TEST_CASE("retrieval recall: monotone, exhaustive-oracle equality, full recall") {
    Rng rng(41);
    Tensor f = testsup::random_unit_rows(60, 7, rng);
    std::vector<int> labels(60);
    for (size_t i = 0; i < 60; ++i) labels[i] = static_cast<int>(rng.uniform_index(4));
    FeatureBank train = bank_from(f, labels);

    Rng rng2(42);
    Tensor ft = testsup::random_unit_rows(30, 7, rng2);
    std::vector<int> lt(30);
    for (size_t i = 0; i < 30; ++i) lt[i] = static_cast<int>(rng2.uniform_index(4));
    FeatureBank test = bank_from(ft, lt);

    auto recalls = retrieval_recall(train, test, {1, 5, 10});
    CHECK(recalls.at(1) <= recalls.at(5));
    CHECK(recalls.at(5) <= recalls.at(10));

    // against brute-force enumeration
    for (int n : {1, 5, 10}) {
        long hits = 0;
        for (long i = 0; i < test.size(); ++i) {
            auto nn = brute_force_top_n(train, test, i, n);
            bool hit = false;
            for (long j : nn)
                if (train.labels[static_cast<size_t>(j)] == test.labels[static_cast<size_t>(i)]) hit = true;
            if (hit) ++hits;
        }
        CHECK(recalls.at(n) == doctest::Approx(hits / 30.0).epsilon(1e-12));
    }

    // querying the whole train set always finds a same-label item when one exists
    auto full = retrieval_recall(train, train, {static_cast<int>(train.size())});
    CHECK(full.at(static_cast<int>(train.size())) == 1.0);

    CHECK_THROWS_AS(retrieval_recall(train, test, {100}), ContractViolation);
}

TEST_CASE("hand-built three-item bank with known neighbour order") {
    // train items at angles 0, 45, 90 degrees in 2-d; query at 30 degrees
    const double r2 = std::sqrt(0.5);
    FeatureBank train = bank_from(Tensor::matrix(3, 2, {1, 0, r2, r2, 0, 1}), {0, 1, 0});
    FeatureBank query =
        bank_from(Tensor::matrix(1, 2, {std::cos(0.5235987755982988), std::sin(0.5235987755982988)}),
                  {0});
    // nearest is the 45-degree item (label 1), then 0 degrees (label 0)
    auto r = retrieval_recall(train, query, {1, 2});
    CHECK(r.at(1) == 0.0);
    CHECK(r.at(2) == 1.0);
}

TEST_CASE("feature_std: collapse, isotropic estimate, permutation invariance") {
    FeatureBank collapsed = bank_from(Tensor::full({50, 8}, 0.3), std::vector<int>(50, 0));
    CHECK(feature_std(collapsed) == 0.0);

    // isotropic Gaussian rows normalized to the sphere in dimension 16:
    // per-dimension std is about 1/4 (Monte-Carlo oracle)
    std::mt19937_64 eng(1234);
    auto normal = [&]() {
        const double u1 = std::max(1e-12, static_cast<double>(eng() >> 11) * 0x1.0p-53);
        const double u2 = static_cast<double>(eng() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    };
    const long s = 4000, d = 16;
    Tensor g = Tensor::zeros({s, d});
    for (double& v : g.data) v = normal();
    FeatureBank iso = bank_from(ops::l2_normalize_rows(g), std::vector<int>(static_cast<size_t>(s), 0));
    CHECK(std::abs(feature_std(iso) - 0.25) <= 0.03);

    // invariant to row permutation
    Tensor shuffled = iso.features;
    std::vector<long> perm(static_cast<size_t>(s));
    std::iota(perm.begin(), perm.end(), 0);
    Rng prng(5);
    prng.shuffle(perm);
    for (long i = 0; i < s; ++i)
        for (long j = 0; j < d; ++j) shuffled.at(i, j) = iso.features.at(perm[static_cast<size_t>(i)], j);
    FeatureBank permuted = bank_from(shuffled, iso.labels);
    CHECK(feature_std(permuted) == doctest::Approx(feature_std(iso)).epsilon(1e-12));
}

TEST_CASE("extract_features: determinism, shape, unit rows") {
    Dataset ds = synth_shapes(30, 12, 4, 3);
    TrainConfig cfg;
    cfg.encoder = "mlp:16,10";
    cfg.projector_hidden = 12;
    cfg.projector_out = 8;
    cfg.batch_size = 8;
    cfg.queue_size = 8;
    NetworkSpec spec = make_network_spec(cfg, 12 * 12 * 3, 3, 12, 12);
    SiameseModel model = init_model(spec, 2);

    FeatureBank a = extract_features(model, ds, cfg, Branch::online);
    FeatureBank b = extract_features(model, ds, cfg, Branch::online);
    CHECK(a.features.data == b.features.data);
    CHECK(a.size() == 30);
    CHECK(a.features.cols() == 10);  // encoder output, not projector
    for (long i = 0; i < a.size(); ++i) {
        double sq = 0.0;
        for (long j = 0; j < a.features.cols(); ++j) sq += a.features.at(i, j) * a.features.at(i, j);
        CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-12);
    }

    FeatureBank t = extract_features(model, ds, cfg, Branch::target);
    CHECK(t.features.data == a.features.data);  // theta_t == theta_s at init
}

TEST_CASE("sweep produces one row per value with a summary file") {
    Dataset train = synth_shapes(24, 12, 4, 4);
    Dataset test = synth_shapes(12, 12, 4, 5);
    TrainConfig cfg;
    cfg.encoder = "mlp:12,8";
    cfg.projector_hidden = 8;
    cfg.projector_out = 6;
    cfg.batch_size = 8;
    cfg.queue_size = 8;
    cfg.total_epochs = 1;
    cfg.warmup_epochs = 0;
    const std::string out = temp_dir("sce_sweep_test");
    auto rows = sweep(cfg, SweepAxis::lambda, {"0", "0.5", "1"}, train, test, out);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) {
        CHECK(r.knn_acc >= 0.0);
        CHECK(r.knn_acc <= 1.0);
        CHECK(std::filesystem::exists(r.metrics_path));
    }
    CsvTable summary = read_csv(out + "/summary.csv");
    CHECK(summary.header == std::vector<std::string>{"value", "knn_acc", "probe_acc", "feature_std"});
    CHECK(summary.rows.size() == 3);
}
