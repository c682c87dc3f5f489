// Acceptance suite: one test case per criterion, each printing a PASS/FAIL
// line with the measured quantity next to its threshold.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sce/eval.hpp"
#include "sce/kernels.hpp"
#include "sce/loss.hpp"
#include "sce/trainer.hpp"
#include "test_support.hpp"

using namespace sce;

namespace {

std::string run_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / "sce_acceptance" / name;
    std::filesystem::remove_all(p);
    return p.string();
}

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] acceptance criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
                detail.c_str());
    std::fflush(stdout);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

TrainConfig shapes_defaults() {
    TrainConfig cfg;  // lambda 0.5, tau 0.1, tau_m 0.07, strong-alpha/beta, symmetrized
    cfg.total_epochs = 50;
    return cfg;
}

double knn_of_checkpoint(const std::string& checkpoint_path, const Dataset& train,
                         const Dataset& test, double* fstd = nullptr) {
    TrainingState st = load_checkpoint(checkpoint_path);
    FeatureBank train_bank = extract_features(st.model, train, st.config, Branch::online);
    FeatureBank test_bank = extract_features(st.model, test, st.config, Branch::online);
    if (fstd) *fstd = feature_std(test_bank);
    return knn_classify(train_bank, test_bank, 10);
}

}  // namespace

TEST_CASE("criterion 1: decomposition identity on the specified grid") {
    Timer timer;
    const long batches[] = {2, 8};
    const long queues[] = {4, 64};
    const double lambdas[] = {0.0, 0.25, 0.5, 1.0};
    const double tau_ms[] = {0.05, 0.07, 0.1};
    double worst = 0.0;
    int trial = 0;
    Rng meta(606);
    while (trial < 100) {
        for (long b : batches)
            for (long m : queues)
                for (double lambda : lambdas)
                    for (double tau_m : tau_ms) {
                        if (trial >= 100) break;
                        Rng rng = meta.child("c1", trial);
                        Tensor z1 = testsup::random_unit_rows(b, 8, rng);
                        Tensor z2 = testsup::random_unit_rows(b, 8, rng);
                        Tensor q = testsup::random_unit_rows(m, 8, rng);
                        worst = std::max(worst, decompose_check(z1, z2, q, lambda, 0.1, tau_m));
                        ++trial;
                    }
    }
    const double secs = timer.seconds();
    const bool ok = worst <= 1e-9 && secs < 1.0;
    report(1, ok, format_msg("100 instances, max residual ", worst, " (limit 1e-9), ", secs,
                             " s (limit 1 s)"));
    CHECK(worst <= 1e-9);
    CHECK(secs < 1.0);
}

TEST_CASE("criterion 2: full-pipeline gradients vs central differences") {
    Timer timer;
    // toy MLP with batch-norm and predictor, B=4, M=16, symmetrized
    double worst = 0.0;
    for (int seed = 0; seed < 5; ++seed) {
        NetworkSpec spec;
        spec.encoder = encoder_spec_from_string("mlp:10,8");
        spec.projector = {2, 8, 6, BnPlacement::hidden};
        spec.use_predictor = true;
        spec.predictor = {2, 8};
        spec.input_dim = 12;
        SiameseModel model = init_model(spec, 1000 + static_cast<uint64_t>(seed));

        Rng rng = Rng(2000).child("c2", seed);
        Tensor view1 = testsup::random_tensor({4, 12}, rng, 0.0, 1.0);
        Tensor view2 = testsup::random_tensor({4, 12}, rng, 0.0, 1.0);
        Tensor queue = testsup::random_unit_rows(16, 6, rng);
        LossConfig loss_cfg;  // lambda 0.5, tau 0.1, tau_m 0.07, strict, symmetrized

        Graph g;
        std::vector<Tensor> leaves;
        SymmetrizedResult res = symmetrized_sce(g, model, view1, view2, queue, loss_cfg, leaves);
        g.backward(res.loss);

        auto eval = [&]() {
            Graph g2;
            std::vector<Tensor> l2;
            return symmetrized_sce(g2, model, view1, view2, queue, loss_cfg, l2).loss.item();
        };
        for (size_t pi = 0; pi < model.online.size(); ++pi) {
            if (!model.online[pi].trainable) continue;
            REQUIRE(g.has_grad(leaves[pi]));
            const Tensor& analytic = g.grad(leaves[pi]);
            std::vector<double>& data = model.online[pi].value.data;
            for (size_t j = 0; j < data.size(); ++j) {
                const double orig = data[j];
                data[j] = orig + 1e-5;
                const double up = eval();
                data[j] = orig - 1e-5;
                const double down = eval();
                data[j] = orig;
                const double fd = (up - down) / 2e-5;
                const double err = std::abs(analytic.data[j] - fd) /
                                   std::max({1.0, std::abs(analytic.data[j]), std::abs(fd)});
                worst = std::max(worst, err);
            }
        }
    }
    const double secs = timer.seconds();
    const bool ok = worst <= 1e-5 && secs < 30.0;
    report(2, ok, format_msg("5 seeds, every parameter, max rel err ", worst,
                             " (limit 1e-5), ", secs, " s (limit 30 s)"));
    CHECK(worst <= 1e-5);
    CHECK(secs < 30.0);
}

TEST_CASE("criterion 3: lambda endpoint reductions hold at every logged step") {
    Dataset ds = synth_shapes(64, 12, 4, 303);
    TrainConfig base;
    base.encoder = "mlp:16,12";
    base.projector_hidden = 12;
    base.projector_out = 8;
    base.batch_size = 8;
    base.queue_size = 16;
    base.total_epochs = 3;
    base.warmup_epochs = 1;

    TrainConfig l1 = base;
    l1.lambda = 1.0;
    TrainResult r1 = train_run(l1, ds, run_dir("c3_lambda1"));
    double worst1 = 0.0;
    for (const MetricsRecord& r : r1.metrics)
        worst1 = std::max(worst1, std::abs(r.loss - r.loss_infonce));

    TrainConfig l0 = base;
    l0.lambda = 0.0;
    TrainResult r0 = train_run(l0, ds, run_dir("c3_lambda0"));
    double worst0 = 0.0;
    for (const MetricsRecord& r : r0.metrics)
        worst0 = std::max(worst0, std::abs(r.loss - (r.loss_ressl + r.loss_ceil)));

    const bool ok = worst1 <= 1e-12 && worst0 <= 1e-9;
    report(3, ok, format_msg("lambda=1 max |loss - infonce| = ", worst1,
                             " (limit 1e-12); lambda=0 max |loss - ressl - ceil| = ", worst0,
                             " (limit 1e-9); ", r1.metrics.size() + r0.metrics.size(), " steps"));
    CHECK(worst1 <= 1e-12);
    CHECK(worst0 <= 1e-9);
}

TEST_CASE("criterion 4: structural invariants") {
    // distribution rows sum to 1
    double worst_sum = 0.0;
    Rng meta(404);
    for (int trial = 0; trial < 50; ++trial) {
        Rng rng = meta.child("c4", trial);
        Tensor z2 = testsup::random_unit_rows(4, 6, rng);
        Tensor q = testsup::random_unit_rows(12, 6, rng);
        Tensor z1 = testsup::random_unit_rows(4, 6, rng);
        for (RelationalMode mode : {RelationalMode::strict, RelationalMode::pseudo_code}) {
            SimilarityLogits tl = target_logits(z2, q, mode);
            Tensor s2 = relational_distribution(tl, 0.07);
            Tensor w = build_target(s2, rng.uniform()).w;
            Tensor p1 = online_distribution(nullptr, online_logits(nullptr, z1, z2, q), 0.1);
            for (const Tensor* t : {&s2, &w, &p1})
                for (long i = 0; i < t->rows(); ++i) {
                    double sum = 0.0;
                    for (long j = 0; j < t->cols(); ++j) sum += t->at(i, j);
                    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
                }
        }
    }

    // queue FIFO law, 1000 randomized push sequences
    bool fifo_ok = true;
    for (int trial = 0; trial < 1000 && fifo_ok; ++trial) {
        Rng rng = meta.child("c4-fifo", trial);
        const long cap = 1 + static_cast<long>(rng.uniform_index(12));
        MemoryQueue q(cap, 2);
        std::vector<std::array<double, 2>> pushed;
        const int rounds = 1 + static_cast<int>(rng.uniform_index(5));
        for (int p = 0; p < rounds; ++p) {
            const long k = 1 + static_cast<long>(rng.uniform_index(static_cast<size_t>(cap)));
            Tensor rows = testsup::random_unit_rows(k, 2, rng);
            q.push(rows);
            for (long i = 0; i < k; ++i) pushed.push_back({rows.at(i, 0), rows.at(i, 1)});
        }
        const long expect = std::min<long>(cap, static_cast<long>(pushed.size()));
        Tensor got = q.contents_in_age_order();
        if (got.rows() != expect) fifo_ok = false;
        for (long i = 0; i < expect && fifo_ok; ++i) {
            const auto& want = pushed[pushed.size() - static_cast<size_t>(expect - i)];
            if (got.at(i, 0) != want[0] || got.at(i, 1) != want[1]) fifo_ok = false;
        }
    }

    // EMA schedule endpoints, exact
    TrainConfig cfg;
    cfg.total_epochs = 9;
    cfg.warmup_epochs = 2;
    cfg.batch_size = 8;
    ScheduleInfo sched = make_schedule(cfg, 72);
    const bool ema_ok = momentum_schedule(0, sched) == cfg.momentum_init &&
                        momentum_schedule(sched.total_steps - 1, sched) == 1.0 &&
                        lr_schedule(0, sched) == 0.0;

    // target parameters receive zero optimizer gradient on every step of a
    // short run: theta_t must exactly follow the EMA recursion
    Dataset ds = synth_shapes(32, 12, 4, 404);
    TrainConfig small;
    small.encoder = "mlp:16,12";
    small.projector_hidden = 12;
    small.projector_out = 8;
    small.batch_size = 8;
    small.queue_size = 16;
    small.total_epochs = 2;
    small.warmup_epochs = 1;
    NetworkSpec spec = make_network_spec(small, 12 * 12 * 3, 3, 12, 12);
    SiameseModel model = init_model(spec, small.seed);
    std::vector<Tensor> vel;
    for (const Param& p : model.online.params) vel.push_back(Tensor::zeros(p.value.shape));
    MemoryQueue queue(small.queue_size, small.projector_out);
    Rng warm(7);
    queue.push(testsup::random_unit_rows(small.queue_size, small.projector_out, warm));
    ScheduleInfo s2 = make_schedule(small, ds.size());
    std::vector<size_t> order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    bool target_ok = true;
    for (long step = 0; step < s2.total_steps && target_ok; ++step) {
        std::vector<size_t> batch(order.begin(), order.begin() + small.batch_size);
        SiameseModel before = model;
        MetricsRecord rec = train_step(model, vel, ds, batch, queue, small, step,
                                       static_cast<int>(step / 4), s2);
        (void)rec;
        const double m = momentum_schedule(step, s2);
        for (size_t i = 0; i < model.target.size() && target_ok; ++i)
            for (size_t j = 0; j < model.target[i].value.data.size(); ++j) {
                const double expect = m * before.target[i].value.data[j] +
                                      (1.0 - m) * model.online[i].value.data[j];
                if (std::abs(model.target[i].value.data[j] - expect) > 1e-12) {
                    target_ok = false;
                    break;
                }
            }
    }

    const bool ok = worst_sum <= 1e-12 && fifo_ok && ema_ok && target_ok;
    report(4, ok, format_msg("row sums within ", worst_sum, " of 1 (limit 1e-12); FIFO law ",
                             fifo_ok ? "holds" : "violated", " over 1000 cases; schedule endpoints ",
                             ema_ok ? "exact" : "wrong", "; target branch ",
                             target_ok ? "EMA-only" : "moved by optimizer"));
    CHECK(worst_sum <= 1e-12);
    CHECK(fifo_ok);
    CHECK(ema_ok);
    CHECK(target_ok);
}

TEST_CASE("criterion 5: desk-scale learning on synthetic shapes") {
    Timer timer;
    Dataset train = synth_shapes(2000, 24, 4, 1);
    Dataset test = synth_shapes(500, 24, 4, 2);
    TrainConfig cfg = shapes_defaults();
    cfg.threads = 1;  // single-core as specified
    TrainResult res = train_run(cfg, train, run_dir("c5"));
    double fstd = 0.0;
    const double knn = knn_of_checkpoint(res.checkpoint_path, train, test, &fstd);
    const double secs = timer.seconds();
    const bool ok = knn >= 0.70 && fstd >= 0.01 && secs <= 600.0;
    report(5, ok, format_msg("kNN(k=10) = ", knn, " (needs >= 0.70, chance 0.25), feature_std = ",
                             fstd, " (needs >= 0.01), ", secs, " s single-core (limit 600 s)"));
    CHECK(knn >= 0.70);
    CHECK(fstd >= 0.01);
    CHECK(secs <= 600.0);
}

TEST_CASE("criterion 6: lambda trend over three seeds") {
    // Mirrors the paper's lambda-sweep protocol: strong online view, weak
    // target view, no symmetrization, tau_m = 0.05.
    Dataset train = synth_shapes(2000, 24, 4, 1);
    Dataset test = synth_shapes(500, 24, 4, 2);
    const double lambdas[] = {0.0, 0.5, 1.0};
    double mean[3] = {0, 0, 0};
    std::string detail = "per-seed kNN";
    for (int li = 0; li < 3; ++li) {
        detail += format_msg(" | lambda=", lambdas[li], ":");
        for (uint64_t seed = 1; seed <= 3; ++seed) {
            TrainConfig cfg = shapes_defaults();
            cfg.lambda = lambdas[li];
            cfg.aug_online = "strong";
            cfg.aug_target = "weak";
            cfg.symmetrize = false;
            cfg.tau_m = 0.05;
            cfg.seed = seed;
            cfg.threads = 2;
            TrainResult res = train_run(
                cfg, train, run_dir(format_msg("c6_l", li, "_s", seed)));
            const double knn = knn_of_checkpoint(res.checkpoint_path, train, test);
            mean[li] += knn / 3.0;
            detail += format_msg(" ", knn);
        }
    }
    const bool ok = mean[1] >= mean[2] - 0.02 && mean[1] >= mean[0] - 0.02;
    report(6, ok, format_msg("mean kNN lambda=0: ", mean[0], ", lambda=0.5: ", mean[1],
                             ", lambda=1: ", mean[2], " (lambda=0.5 within 0.02 of both); ",
                             detail));
    CHECK(mean[1] >= mean[2] - 0.02);
    CHECK(mean[1] >= mean[0] - 0.02);
}

TEST_CASE("criterion 7: no collapse when tau_m reaches tau") {
    Dataset train = synth_shapes(2000, 24, 4, 1);
    TrainConfig cfg = shapes_defaults();
    cfg.tau_m = 0.1;  // tau_m == tau
    cfg.threads = 2;
    TrainResult res = train_run(cfg, train, run_dir("c7"));
    double min_std = 1e300;
    for (const MetricsRecord& r : res.metrics) min_std = std::min(min_std, r.feature_std);
    const bool ok = min_std >= 0.01;
    report(7, ok, format_msg("tau_m = tau = 0.1; min feature_std over ", res.metrics.size(),
                             " logged steps = ", min_std, " (needs >= 0.01)"));
    CHECK(min_std >= 0.01);
}

TEST_CASE("criterion 8: temporal pipeline learns motion retrieval") {
    Timer timer;
    Dataset train = synth_video(800, 8, 16, 4, 1);
    Dataset test = synth_video(200, 8, 16, 4, 2);
    TrainConfig cfg = shapes_defaults();
    cfg.rgb_diff_prob = 0.2;
    cfg.threads = 2;
    TrainResult res = train_run(cfg, train, run_dir("c8"));

    TrainingState st = load_checkpoint(res.checkpoint_path);
    FeatureBank train_bank = extract_features(st.model, train, st.config, Branch::online);
    FeatureBank test_bank = extract_features(st.model, test, st.config, Branch::online);
    auto recalls = retrieval_recall(train_bank, test_bank, {1, 5, 10});
    const double secs = timer.seconds();
    const bool ok = recalls.at(1) >= 0.5 && recalls.at(1) <= recalls.at(5) &&
                    recalls.at(5) <= recalls.at(10) && secs <= 900.0;
    report(8, ok, format_msg("R@1 = ", recalls.at(1), " (needs >= 0.5, chance 0.25), R@5 = ",
                             recalls.at(5), ", R@10 = ", recalls.at(10), " (monotone); ", secs,
                             " s (limit 900 s)"));
    CHECK(recalls.at(1) >= 0.5);
    CHECK(recalls.at(1) <= recalls.at(5));
    CHECK(recalls.at(5) <= recalls.at(10));
    CHECK(secs <= 900.0);
}

TEST_CASE("criterion 9: bytewise-deterministic metrics in reference mode") {
    Dataset ds = synth_shapes(100, 16, 4, 909);
    TrainConfig cfg;
    cfg.encoder = "mlp:24,16";
    cfg.projector_hidden = 16;
    cfg.projector_out = 12;
    cfg.batch_size = 10;
    cfg.queue_size = 20;
    cfg.total_epochs = 3;
    cfg.warmup_epochs = 1;
    cfg.threads = 1;  // reference mode

    TrainResult a = train_run(cfg, ds, run_dir("c9_a"));
    TrainResult b = train_run(cfg, ds, run_dir("c9_b"));
    std::ifstream fa(a.metrics_path, std::ios::binary), fb(b.metrics_path, std::ios::binary);
    std::string bytes_a((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    std::string bytes_b((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    const bool ok = !bytes_a.empty() && bytes_a == bytes_b;
    report(9, ok, format_msg("two identical runs, metrics CSVs ",
                             ok ? "bytewise identical" : "differ", " (", bytes_a.size(),
                             " bytes, ", a.metrics.size(), " steps)"));
    CHECK(!bytes_a.empty());
    CHECK(bytes_a == bytes_b);
}
