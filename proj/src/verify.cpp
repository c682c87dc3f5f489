#include "sce/verify.hpp"

#include <cmath>
#include <functional>

#include "sce/loss.hpp"
#include "sce/metrics.hpp"
#include "sce/queue.hpp"
#include "sce/rng.hpp"
#include "sce/trainer.hpp"

namespace sce {

namespace {

Tensor random_unit_rows(long r, long c, Rng& rng) {
    Tensor t = Tensor::zeros({r, c});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return ops::l2_normalize_rows(t);
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

CheckResult check_decomposition() {
    CheckResult r{"decomposition identity (100 instances)", true, ""};
    Rng meta(2024);
    double worst = 0.0;
    int trial = 0;
    const long batches[] = {2, 8};
    const long queues[] = {4, 64};
    const double lambdas[] = {0.0, 0.25, 0.5, 1.0};
    const double tau_ms[] = {0.05, 0.07, 0.1};
    while (trial < 100) {
        for (long b : batches)
            for (long m : queues)
                for (double lambda : lambdas)
                    for (double tau_m : tau_ms) {
                        if (trial >= 100) break;
                        Rng rng = meta.child("vd", trial);
                        Tensor z1 = random_unit_rows(b, 8, rng);
                        Tensor z2 = random_unit_rows(b, 8, rng);
                        Tensor q = random_unit_rows(m, 8, rng);
                        worst = std::max(worst, decompose_check(z1, z2, q, lambda, 0.1, tau_m));
                        ++trial;
                    }
    }
    r.ok = worst <= 1e-9;
    r.detail = format_msg("max residual ", format_double(worst), " (limit 1e-9)");
    return r;
}

CheckResult check_loss_gradients() {
    CheckResult r{"loss gradient vs central differences", true, ""};
    double worst = 0.0;
    for (int seed = 0; seed < 3; ++seed) {
        Rng rng = Rng(55).child("vg", seed);
        const long b = 3, m = 6, d = 5;
        Tensor raw = Tensor::zeros({b, d});
        for (double& v : raw.data) v = rng.uniform(-1.0, 1.0);
        Tensor z2 = random_unit_rows(b, d, rng);
        Tensor queue = random_unit_rows(m, d, rng);
        TargetDistribution w = build_target(
            relational_distribution(target_logits(z2, queue, RelationalMode::strict), 0.07), 0.5);

        auto eval = [&]() {
            Tensor z = ops::l2_normalize_rows(raw);
            Tensor ol = online_logits(nullptr, z, z2, queue);
            return sce_loss(nullptr, w, online_distribution(nullptr, ol, 0.1)).item();
        };
        Graph g;
        Tensor leaf = g.leaf(raw, true);
        Tensor z = g.l2_normalize_rows(leaf);
        Tensor ol = online_logits(&g, z, z2, queue);
        g.backward(sce_loss(&g, w, online_distribution(&g, ol, 0.1)));
        const Tensor& analytic = g.grad(leaf);
        for (size_t i = 0; i < raw.data.size(); ++i) {
            const double orig = raw.data[i];
            raw.data[i] = orig + 1e-5;
            const double up = eval();
            raw.data[i] = orig - 1e-5;
            const double down = eval();
            raw.data[i] = orig;
            worst = std::max(worst, rel_err(analytic.data[i], (up - down) / 2e-5));
        }
    }
    r.ok = worst <= 1e-5;
    r.detail = format_msg("max relative error ", format_double(worst), " (limit 1e-5)");
    return r;
}

CheckResult check_distribution_properties() {
    CheckResult r{"distribution rows sum to 1; softmax shift invariance", true, ""};
    Rng meta(7);
    double worst_sum = 0.0, worst_shift = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng = meta.child("vp", trial);
        Tensor x = Tensor::zeros({4, 7});
        for (double& v : x.data) v = rng.uniform(-3.0, 3.0);
        Tensor p = ops::softmax_rows(x);
        Tensor shifted = x;
        for (long i = 0; i < 4; ++i) {
            const double c = rng.uniform(-100.0, 100.0);
            for (long j = 0; j < 7; ++j) shifted.at(i, j) += c;
        }
        Tensor p2 = ops::softmax_rows(shifted);
        for (long i = 0; i < 4; ++i) {
            double sum = 0.0;
            for (long j = 0; j < 7; ++j) {
                sum += p.at(i, j);
                worst_shift = std::max(worst_shift, std::abs(p.at(i, j) - p2.at(i, j)));
            }
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
    }
    r.ok = worst_sum <= 1e-12 && worst_shift <= 1e-10;
    r.detail = format_msg("max |row sum - 1| = ", format_double(worst_sum), ", max shift drift = ",
                          format_double(worst_shift));
    return r;
}

CheckResult check_lambda_one_reduction() {
    CheckResult r{"sce_loss at lambda=1 equals infonce_loss", true, ""};
    double worst = 0.0;
    for (int seed = 0; seed < 10; ++seed) {
        Rng rng = Rng(99).child("vl", seed);
        Tensor z1 = random_unit_rows(4, 6, rng);
        Tensor z2 = random_unit_rows(4, 6, rng);
        Tensor q = random_unit_rows(12, 6, rng);
        LossBreakdown b = decompose(z1, z2, q, 1.0, 0.1, 0.07);
        worst = std::max(worst, std::abs(b.sce - b.infonce));
    }
    r.ok = worst <= 1e-12;
    r.detail = format_msg("max |sce - infonce| = ", format_double(worst), " (limit 1e-12)");
    return r;
}

CheckResult check_queue_fifo() {
    CheckResult r{"memory queue FIFO law (randomized pushes)", true, ""};
    Rng meta(31);
    for (int trial = 0; trial < 200 && r.ok; ++trial) {
        Rng rng = meta.child("vq", trial);
        const long cap = 2 + static_cast<long>(rng.uniform_index(14));
        const long dim = 3;
        MemoryQueue queue(cap, dim);
        std::vector<std::vector<double>> pushed;
        const int pushes = 1 + static_cast<int>(rng.uniform_index(6));
        for (int p = 0; p < pushes; ++p) {
            const long k = 1 + static_cast<long>(rng.uniform_index(static_cast<size_t>(cap)));
            Tensor rows = random_unit_rows(k, dim, rng);
            queue.push(rows);
            for (long i = 0; i < k; ++i)
                pushed.push_back({rows.at(i, 0), rows.at(i, 1), rows.at(i, 2)});
        }
        const long expect = std::min<long>(cap, static_cast<long>(pushed.size()));
        Tensor got = queue.contents_in_age_order();
        if (got.rows() != expect) {
            r.ok = false;
            break;
        }
        for (long i = 0; i < expect && r.ok; ++i) {
            const auto& want = pushed[pushed.size() - static_cast<size_t>(expect - i)];
            for (long j = 0; j < dim; ++j)
                if (got.at(i, j) != want[static_cast<size_t>(j)]) r.ok = false;
        }
    }
    r.detail = r.ok ? "contents equal the last M pushed rows, in age order"
                    : "FIFO law violated";
    return r;
}

CheckResult check_schedules() {
    CheckResult r{"schedule endpoints", true, ""};
    TrainConfig cfg;
    cfg.total_epochs = 10;
    cfg.warmup_epochs = 2;
    cfg.batch_size = 4;
    ScheduleInfo s = make_schedule(cfg, 40);  // 10 steps/epoch
    const bool lr0 = lr_schedule(0, s) == 0.0;
    const bool lr_warm = std::abs(lr_schedule(s.warmup_steps, s) - s.peak_lr) <= 1e-15;
    const bool lr_end = std::abs(lr_schedule(s.total_steps - 1, s)) <= 1e-12;
    const bool m0 = momentum_schedule(0, s) == cfg.momentum_init;
    const bool m_end = momentum_schedule(s.total_steps - 1, s) == 1.0;
    r.ok = lr0 && lr_warm && lr_end && m0 && m_end;
    r.detail = format_msg("lr(0)=", lr_schedule(0, s), " lr(warm)=", lr_schedule(s.warmup_steps, s),
                          " lr(last)=", lr_schedule(s.total_steps - 1, s),
                          " m(0)=", momentum_schedule(0, s),
                          " m(last)=", momentum_schedule(s.total_steps - 1, s));
    return r;
}

CheckResult check_l2norm() {
    CheckResult r{"l2_normalize_rows unit norms and idempotence", true, ""};
    Rng rng(17);
    Tensor x = Tensor::zeros({6, 9});
    for (double& v : x.data) v = rng.uniform(-2.0, 2.0);
    Tensor y = ops::l2_normalize_rows(x);
    Tensor yy = ops::l2_normalize_rows(y);
    double worst = 0.0;
    for (long i = 0; i < 6; ++i) {
        double sq = 0.0;
        for (long j = 0; j < 9; ++j) {
            sq += y.at(i, j) * y.at(i, j);
            worst = std::max(worst, std::abs(yy.at(i, j) - y.at(i, j)));
        }
        worst = std::max(worst, std::abs(std::sqrt(sq) - 1.0));
    }
    r.ok = worst <= 1e-12;
    r.detail = format_msg("max deviation ", format_double(worst), " (limit 1e-12)");
    return r;
}

}  // namespace

std::vector<CheckResult> run_verify() {
    return {
        check_decomposition(),    check_loss_gradients(), check_distribution_properties(),
        check_lambda_one_reduction(), check_queue_fifo(),  check_schedules(),
        check_l2norm(),
    };
}

}  // namespace sce
