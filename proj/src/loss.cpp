#include "sce/loss.hpp"

#include <cmath>
#include <limits>

#include "sce/kernels.hpp"

namespace sce {

namespace {
constexpr double kLogClamp = 1e-30;
constexpr double kUnitTol = 1e-6;
constexpr double kCosineSlack = 1e-9;

void check_unit_rows(const Tensor& t, const char* who) {
    std::vector<double> norms(static_cast<size_t>(t.rows()));
    kernels::row_norms(t.data.data(), norms.data(), static_cast<size_t>(t.rows()),
                       static_cast<size_t>(t.cols()));
    for (size_t i = 0; i < norms.size(); ++i)
        SCE_CHECK(std::abs(norms[i] - 1.0) <= kUnitTol, who, ": row ", i,
                  " is not unit norm (", norms[i], ")");
}

void check_rows_sum_to_one(const Tensor& t, const char* who) {
    for (long i = 0; i < t.rows(); ++i) {
        double s = 0.0;
        for (long j = 0; j < t.cols(); ++j) s += t.at(i, j);
        SCE_CHECK(std::abs(s - 1.0) <= 1e-6, who, ": row ", i, " sums to ", s, ", expected 1");
    }
}
}  // namespace

RelationalMode relational_mode_from_string(const std::string& s) {
    if (s == "strict") return RelationalMode::strict;
    if (s == "pseudo-code" || s == "pseudo_code") return RelationalMode::pseudo_code;
    throw ContractViolation("unknown relational mode '" + s + "' (strict|pseudo-code)");
}

std::string to_string(RelationalMode m) {
    return m == RelationalMode::strict ? "strict" : "pseudo-code";
}

void SimilarityLogits::validate() const {
    SCE_CHECK(values.ndim() == 2 && values.cols() >= 2,
              "similarity logits must be B x (1+M) with M >= 1");
    for (double v : values.data)
        SCE_CHECK(v >= -1.0 - kCosineSlack && v <= 1.0 + kCosineSlack,
                  "similarity logit ", v, " outside cosine range");
}

Tensor cosine_similarity(Graph* g, const Tensor& queries, const Tensor& keys) {
    check_unit_rows(queries, "cosine_similarity(queries)");
    check_unit_rows(keys, "cosine_similarity(keys)");
    if (g) {
        Tensor k = keys;
        k.node = -1;  // keys are detached targets
        return g->matmul_nt(queries, k);
    }
    return ops::matmul_nt(queries, keys);
}

SimilarityLogits target_logits(const Tensor& z2, const Tensor& queue, RelationalMode mode) {
    Tensor sims = cosine_similarity(nullptr, z2, queue);
    SimilarityLogits out;
    out.mode = mode;
    out.values = ops::concat_columns(Tensor::zeros({z2.rows(), 1}), sims);
    return out;
}

Tensor online_logits(Graph* g, const Tensor& z1, const Tensor& z2_detached, const Tensor& queue) {
    check_unit_rows(z1, "online_logits(z1)");
    check_unit_rows(z2_detached, "online_logits(z2)");
    if (g) {
        Tensor z2c = z2_detached;
        z2c.node = -1;
        Tensor pos = g->rows_dot(z1, z2c);
        Tensor neg = cosine_similarity(g, z1, queue);
        return g->concat_columns(pos, neg);
    }
    return ops::concat_columns(ops::rows_dot(z1, z2_detached),
                               cosine_similarity(nullptr, z1, queue));
}

Tensor relational_distribution(const SimilarityLogits& logits, double tau_m) {
    SCE_CHECK(tau_m > 0.0, "tau_m must be positive, got ", tau_m);
    logits.validate();
    const long b = logits.batch(), cols = logits.columns(), m = cols - 1;
    const double inv = 1.0 / tau_m;
    if (logits.mode == RelationalMode::pseudo_code) {
        Tensor scaled = ops::scale(logits.values, inv);
        for (long i = 0; i < b; ++i) scaled.at(i, 0) = 0.0;  // positive slot carries logit 0
        return ops::softmax_rows(scaled);
    }
    // strict: softmax over the queue columns only; positive column gets 0.
    Tensor queue_part = Tensor::zeros({b, m});
    for (long i = 0; i < b; ++i)
        for (long j = 0; j < m; ++j) queue_part.at(i, j) = logits.values.at(i, j + 1) * inv;
    Tensor sm = ops::softmax_rows(queue_part);
    Tensor out = Tensor::zeros({b, cols});
    for (long i = 0; i < b; ++i)
        for (long j = 0; j < m; ++j) out.at(i, j + 1) = sm.at(i, j);
    return out;
}

TargetDistribution build_target(const Tensor& s2, double lambda) {
    SCE_CHECK(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0,1], got ", lambda);
    check_rows_sum_to_one(s2, "build_target");
    TargetDistribution out;
    out.lambda = lambda;
    out.w = ops::scale(s2, 1.0 - lambda);
    for (long i = 0; i < out.w.rows(); ++i) out.w.at(i, 0) += lambda;
    return out;
}

Tensor online_distribution(Graph* g, const Tensor& logits, double tau) {
    SCE_CHECK(tau > 0.0, "tau must be positive, got ", tau);
    const double inv = 1.0 / tau;
    if (g) return g->softmax_rows(g->scale(logits, inv));
    return ops::softmax_rows(ops::scale(logits, inv));
}

Tensor sce_loss(Graph* g, const TargetDistribution& target, const Tensor& p1, long* clamp_count) {
    SCE_CHECK(target.w.same_shape(p1), "sce_loss: target/online shapes differ");
    check_rows_sum_to_one(target.w, "sce_loss(w)");
    check_rows_sum_to_one(p1, "sce_loss(p1)");
    const double inv_b = -1.0 / static_cast<double>(p1.rows());
    if (g) {
        Tensor lp = g->log(g->clamp_min(p1, kLogClamp));
        Tensor w = target.w;
        w.node = -1;
        return g->scale(g->sum_all(g->mul(w, lp)), inv_b);
    }
    Tensor lp = ops::log(ops::clamp_min(p1, kLogClamp, clamp_count));
    return ops::scale(ops::sum_all(ops::mul(target.w, lp)), inv_b);
}

double infonce_loss(const Tensor& logits, double tau) {
    // Arithmetic mirrors the graph path of sce_loss with a one-hot target:
    // same softmax kernel, same clamp, same accumulation order over rows.
    Tensor p = online_distribution(nullptr, logits, tau);
    double acc = 0.0;
    for (long i = 0; i < p.rows(); ++i) acc += std::log(std::max(p.at(i, 0), kLogClamp));
    return acc * (-1.0 / static_cast<double>(p.rows()));
}

double ressl_loss(const SimilarityLogits& target, const Tensor& online, double tau, double tau_m) {
    SCE_CHECK(target.mode == RelationalMode::strict,
              "ressl_loss: pseudo-code mode is unsupported (the positive-excluded form needs strict)");
    SCE_CHECK(target.values.same_shape(online), "ressl_loss: logits shapes differ");
    Tensor s2 = relational_distribution(target, tau_m);
    SimilarityLogits online_strict{online, RelationalMode::strict};
    Tensor s1 = relational_distribution(online_strict, tau);
    const long b = online.rows(), cols = online.cols();
    double acc = 0.0;
    for (long i = 0; i < b; ++i)
        for (long j = 1; j < cols; ++j)
            acc += s2.at(i, j) * std::log(std::max(s1.at(i, j), kLogClamp));
    return acc * (-1.0 / static_cast<double>(b));
}

double ceil_loss(const Tensor& logits, double tau) {
    SCE_CHECK(tau > 0.0, "tau must be positive, got ", tau);
    const long b = logits.rows(), cols = logits.cols();
    double acc = 0.0;
    for (long i = 0; i < b; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (long j = 1; j < cols; ++j) m = std::max(m, logits.at(i, j) / tau);
        double queue_sum = 0.0;
        for (long j = 1; j < cols; ++j) queue_sum += std::exp(logits.at(i, j) / tau - m);
        const double all_sum = queue_sum + std::exp(logits.at(i, 0) / tau - m);
        acc += std::log(queue_sum / all_sum);
    }
    return acc * (-1.0 / static_cast<double>(b));
}

LossBreakdown decompose(const Tensor& z1, const Tensor& z2, const Tensor& queue, double lambda,
                        double tau, double tau_m) {
    Tensor ol = online_logits(nullptr, z1, z2, queue);
    SimilarityLogits tl = target_logits(z2, queue, RelationalMode::strict);
    LossBreakdown out;
    Tensor s2 = relational_distribution(tl, tau_m);
    TargetDistribution w = build_target(s2, lambda);
    Tensor p1 = online_distribution(nullptr, ol, tau);
    out.sce = sce_loss(nullptr, w, p1).item();
    out.infonce = infonce_loss(ol, tau);
    out.ressl = ressl_loss(tl, ol, tau, tau_m);
    out.ceil = ceil_loss(ol, tau);
    out.residual = std::abs(out.sce - lambda * out.infonce - (1.0 - lambda) * (out.ressl + out.ceil));
    return out;
}

double decompose_check(const Tensor& z1, const Tensor& z2, const Tensor& queue, double lambda,
                       double tau, double tau_m) {
    return decompose(z1, z2, queue, lambda, tau, tau_m).residual;
}

namespace {

struct DirectionResult {
    Tensor loss;
    LossBreakdown breakdown;
    double lmin = 0.0, lmax = 0.0, lmean = 0.0;
};

DirectionResult one_direction(Graph& g, const Tensor& z_online, const Tensor& z_target,
                              const Tensor& queue, const LossConfig& cfg) {
    Tensor ol = online_logits(&g, z_online, z_target, queue);
    SimilarityLogits tl = target_logits(z_target, queue, cfg.mode);
    Tensor s2 = relational_distribution(tl, cfg.tau_m);
    TargetDistribution w = build_target(s2, cfg.lambda);
    Tensor p1 = online_distribution(&g, ol, cfg.tau);
    DirectionResult r;
    r.loss = sce_loss(&g, w, p1);

    // Value-side components for logging; the residual always refers to the
    // strict-form identity on the same logits.
    Tensor ol_value = ol;
    ol_value.node = -1;
    SimilarityLogits tl_strict = tl;
    tl_strict.mode = RelationalMode::strict;
    r.breakdown.infonce = infonce_loss(ol_value, cfg.tau);
    r.breakdown.ressl = ressl_loss(tl_strict, ol_value, cfg.tau, cfg.tau_m);
    r.breakdown.ceil = ceil_loss(ol_value, cfg.tau);
    if (cfg.mode == RelationalMode::strict) {
        r.breakdown.sce = r.loss.item();
    } else {
        Tensor s2s = relational_distribution(tl_strict, cfg.tau_m);
        Tensor p1v = online_distribution(nullptr, ol_value, cfg.tau);
        r.breakdown.sce = sce_loss(nullptr, build_target(s2s, cfg.lambda), p1v).item();
    }
    r.breakdown.residual = std::abs(r.breakdown.sce - cfg.lambda * r.breakdown.infonce -
                                    (1.0 - cfg.lambda) * (r.breakdown.ressl + r.breakdown.ceil));
    r.lmin = ol_value.data[0];
    r.lmax = ol_value.data[0];
    double acc = 0.0;
    for (double v : ol_value.data) {
        r.lmin = std::min(r.lmin, v);
        r.lmax = std::max(r.lmax, v);
        acc += v;
    }
    r.lmean = acc / static_cast<double>(ol_value.numel());
    return r;
}

}  // namespace

SymmetrizedResult symmetrized_sce(Graph& g, SiameseModel& model, const Tensor& view1,
                                  const Tensor& view2, const Tensor& queue, const LossConfig& cfg,
                                  std::vector<Tensor>& leaves) {
    Temperatures{cfg.tau, cfg.tau_m}.validate();
    SymmetrizedResult out;
    Tensor z1_s = forward_online(g, model, view1, leaves);
    out.z2_t = forward_target(model, view2);
    DirectionResult a = one_direction(g, z1_s, out.z2_t, queue, cfg);

    if (!cfg.symmetrize) {
        out.loss = a.loss;
        out.breakdown = a.breakdown;
        out.clamp_count = g.clamp_events();
        out.logits_min = a.lmin;
        out.logits_max = a.lmax;
        out.logits_mean = a.lmean;
        return out;
    }

    Tensor z2_s = forward_online(g, model, view2, leaves);
    out.z1_t = forward_target(model, view1);
    DirectionResult b = one_direction(g, z2_s, out.z1_t, queue, cfg);

    out.loss = g.scale(g.add(a.loss, b.loss), 0.5);
    out.breakdown.sce = 0.5 * (a.breakdown.sce + b.breakdown.sce);
    out.breakdown.infonce = 0.5 * (a.breakdown.infonce + b.breakdown.infonce);
    out.breakdown.ressl = 0.5 * (a.breakdown.ressl + b.breakdown.ressl);
    out.breakdown.ceil = 0.5 * (a.breakdown.ceil + b.breakdown.ceil);
    out.breakdown.residual = std::max(a.breakdown.residual, b.breakdown.residual);
    out.clamp_count = g.clamp_events();
    out.logits_min = std::min(a.lmin, b.lmin);
    out.logits_max = std::max(a.lmax, b.lmax);
    out.logits_mean = 0.5 * (a.lmean + b.lmean);
    return out;
}

}  // namespace sce
