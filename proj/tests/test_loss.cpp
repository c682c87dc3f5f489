#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "sce/loss.hpp"
#include "test_support.hpp"

using namespace sce;
using testsup::random_unit_rows;

// Standalone scalar re-implementations of the queue-form losses, written as
// direct translations of the defining sums. No shared code with src/; no
// max-subtraction stabilization. Column 0 is the positive.
namespace oracle {

double infonce(const Tensor& ol, double tau) {
    double acc = 0.0;
    for (long i = 0; i < ol.rows(); ++i) {
        double den = 0.0;
        for (long j = 0; j < ol.cols(); ++j) den += std::exp(ol.at(i, j) / tau);
        acc += std::log(std::exp(ol.at(i, 0) / tau) / den);
    }
    return -acc / static_cast<double>(ol.rows());
}

// Strict target relations: positive excluded from the softmax.
double s2_entry(const Tensor& tl, long i, long k, double tau_m) {
    double den = 0.0;
    for (long j = 1; j < tl.cols(); ++j) den += std::exp(tl.at(i, j) / tau_m);
    return std::exp(tl.at(i, k) / tau_m) / den;
}

double ressl(const Tensor& tl, const Tensor& ol, double tau, double tau_m) {
    double acc = 0.0;
    for (long i = 0; i < ol.rows(); ++i) {
        double den1 = 0.0;
        for (long j = 1; j < ol.cols(); ++j) den1 += std::exp(ol.at(i, j) / tau);
        for (long k = 1; k < ol.cols(); ++k) {
            const double s1 = std::exp(ol.at(i, k) / tau) / den1;
            acc += s2_entry(tl, i, k, tau_m) * std::log(s1);
        }
    }
    return -acc / static_cast<double>(ol.rows());
}

double ceil(const Tensor& ol, double tau) {
    double acc = 0.0;
    for (long i = 0; i < ol.rows(); ++i) {
        double num = 0.0, den = 0.0;
        for (long j = 0; j < ol.cols(); ++j) {
            const double e = std::exp(ol.at(i, j) / tau);
            den += e;
            if (j > 0) num += e;
        }
        acc += std::log(num / den);
    }
    return -acc / static_cast<double>(ol.rows());
}

double sce(const Tensor& ol, const Tensor& tl, double lambda, double tau, double tau_m) {
    double acc = 0.0;
    for (long i = 0; i < ol.rows(); ++i) {
        double den = 0.0;
        for (long j = 0; j < ol.cols(); ++j) den += std::exp(ol.at(i, j) / tau);
        for (long k = 0; k < ol.cols(); ++k) {
            const double w = (k == 0 ? lambda : 0.0) +
                             (1.0 - lambda) * (k == 0 ? 0.0 : s2_entry(tl, i, k, tau_m));
            const double p = std::exp(ol.at(i, k) / tau) / den;
            acc += w * std::log(p);
        }
    }
    return -acc / static_cast<double>(ol.rows());
}

}  // namespace oracle

namespace {

struct Instance {
    Tensor z1, z2, queue;
    Tensor ol;              // online logits
    SimilarityLogits tl;    // target logits, strict
};

Instance random_instance(long b, long m, long d, uint64_t seed) {
    Rng r = Rng(seed).child("loss-instance");
    Instance inst;
    inst.z1 = random_unit_rows(b, d, r);
    inst.z2 = random_unit_rows(b, d, r);
    inst.queue = random_unit_rows(m, d, r);
    inst.ol = online_logits(nullptr, inst.z1, inst.z2, inst.queue);
    inst.tl = target_logits(inst.z2, inst.queue, RelationalMode::strict);
    return inst;
}

}  // namespace

TEST_CASE("cosine_similarity basics") {
    Tensor q = Tensor::matrix(1, 2, {0.6, 0.8});
    CHECK(cosine_similarity(nullptr, q, q).at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

    Tensor keys = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    Tensor sims = cosine_similarity(nullptr, q, keys);
    CHECK(sims.at(0, 0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(sims.at(0, 1) == doctest::Approx(0.8).epsilon(1e-12));

    Tensor ortho = Tensor::matrix(2, 2, {1.0, 0.0, 0.0, 1.0});
    CHECK(cosine_similarity(nullptr, ortho, ortho).at(0, 1) == 0.0);

    CHECK_THROWS_AS(cosine_similarity(nullptr, Tensor::matrix(1, 2, {1.0, 1.0}), keys),
                    ContractViolation);
}

TEST_CASE("relational_distribution strict and pseudo-code") {
    // strict, equal queue logits -> uniform over the queue, positive gets 0
    SimilarityLogits uniform{Tensor::matrix(1, 3, {0.0, 0.4, 0.4}), RelationalMode::strict};
    Tensor s = relational_distribution(uniform, 0.07);
    CHECK(s.at(0, 0) == 0.0);
    CHECK(s.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s.at(0, 2) == doctest::Approx(0.5).epsilon(1e-12));

    // strict, queue cosines (1, 0) at tau_m=1 -> (0, e/(e+1), 1/(e+1))
    SimilarityLogits skew{Tensor::matrix(1, 3, {0.0, 1.0, 0.0}), RelationalMode::strict};
    Tensor s2 = relational_distribution(skew, 1.0);
    const double e = std::exp(1.0);
    CHECK(s2.at(0, 0) == 0.0);
    CHECK(s2.at(0, 1) == doctest::Approx(e / (e + 1.0)).epsilon(1e-12));
    CHECK(s2.at(0, 2) == doctest::Approx(1.0 / (e + 1.0)).epsilon(1e-12));

    // pseudo-code, zero queue logits at tau_m=1 -> uniform over all three
    SimilarityLogits pc{Tensor::matrix(1, 3, {0.9, 0.0, 0.0}), RelationalMode::pseudo_code};
    Tensor s3 = relational_distribution(pc, 1.0);  // positive slot forced to logit 0
    for (long j = 0; j < 3; ++j) CHECK(s3.at(0, j) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("build_target endpoints and mixing") {
    Tensor s2 = Tensor::matrix(1, 3, {0.0, 0.7310585786300049, 0.2689414213699951});

    TargetDistribution one_hot = build_target(s2, 1.0);
    CHECK(one_hot.w.at(0, 0) == 1.0);
    CHECK(one_hot.w.at(0, 1) == 0.0);

    TargetDistribution pure = build_target(s2, 0.0);
    for (long j = 0; j < 3; ++j) CHECK(pure.w.at(0, j) == s2.at(0, j));

    TargetDistribution mix = build_target(s2, 0.5);
    CHECK(mix.w.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(mix.w.at(0, 1) == doctest::Approx(0.36552928931500245).epsilon(1e-12));
    CHECK(mix.w.at(0, 2) == doctest::Approx(0.13447071068499755).epsilon(1e-12));

    CHECK_THROWS_AS(build_target(s2, 1.5), ContractViolation);
    CHECK_THROWS_AS(build_target(s2, -0.1), ContractViolation);
}

TEST_CASE("online_distribution values") {
    Tensor flat = online_distribution(nullptr, Tensor::matrix(1, 4, {0.3, 0.3, 0.3, 0.3}), 0.1);
    for (long j = 0; j < 4; ++j) CHECK(flat.at(0, j) == doctest::Approx(0.25).epsilon(1e-12));

    const double e = std::exp(1.0);
    Tensor p = online_distribution(nullptr, Tensor::matrix(1, 3, {1.0, 0.0, 0.0}), 1.0);
    CHECK(p.at(0, 0) == doctest::Approx(e / (e + 2.0)).epsilon(1e-12));
    CHECK(p.at(0, 1) == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-12));

    Tensor sharp = online_distribution(nullptr, Tensor::matrix(1, 3, {0.9, 0.5, 0.2}), 0.01);
    CHECK(sharp.at(0, 0) >= 0.999);
}

TEST_CASE("sce_loss values against closed forms and the scalar oracle") {
    // uniform w == p1 over 3 columns -> ln 3
    Tensor u = Tensor::full({2, 3}, 1.0 / 3);
    TargetDistribution w{u, 0.0};
    CHECK(sce_loss(nullptr, w, u).item() == doctest::Approx(std::log(3.0)).epsilon(1e-12));

    // one-hot w, p1 puts q on that column -> -ln q
    TargetDistribution oh{Tensor::matrix(1, 3, {1.0, 0.0, 0.0}), 1.0};
    Tensor p = Tensor::matrix(1, 3, {0.4, 0.35, 0.25});
    CHECK(sce_loss(nullptr, oh, p).item() == doctest::Approx(-std::log(0.4)).epsilon(1e-12));

    // random B=1, M=2 instance vs the independent scalar oracle
    Instance inst = random_instance(1, 2, 6, 42);
    const double lambda = 0.5, tau = 0.1, tau_m = 0.07;
    Tensor s2 = relational_distribution(inst.tl, tau_m);
    Tensor p1 = online_distribution(nullptr, inst.ol, tau);
    const double got = sce_loss(nullptr, build_target(s2, lambda), p1).item();
    const double want = oracle::sce(inst.ol, inst.tl.values, lambda, tau, tau_m);
    CHECK(got == doctest::Approx(want).epsilon(1e-10));
}

TEST_CASE("infonce_loss values and the lambda=1 reduction") {
    Tensor flat = Tensor::full({3, 5}, 0.2);
    CHECK(infonce_loss(flat, 0.1) == doctest::Approx(std::log(5.0)).epsilon(1e-12));

    // strongly positive logit drives the loss to zero
    Tensor strong = Tensor::matrix(1, 3, {50.0, 0.0, 0.0});
    CHECK(infonce_loss(strong, 1.0) <= 1e-20);

    for (uint64_t seed : {1u, 2u, 3u}) {
        Instance inst = random_instance(4, 8, 5, seed);
        Tensor s2 = relational_distribution(inst.tl, 0.07);
        Tensor p1 = online_distribution(nullptr, inst.ol, 0.1);
        const double via_sce = sce_loss(nullptr, build_target(s2, 1.0), p1).item();
        CHECK(std::abs(via_sce - infonce_loss(inst.ol, 0.1)) <= 1e-12);
        CHECK(std::abs(infonce_loss(inst.ol, 0.1) - oracle::infonce(inst.ol, 0.1)) <= 1e-10);
    }
}

TEST_CASE("ressl_loss values") {
    // identical target and online logits at equal temperature -> entropy of s2
    SimilarityLogits tl{Tensor::matrix(1, 3, {0.0, 0.8, 0.1}), RelationalMode::strict};
    Tensor s2 = relational_distribution(tl, 0.5);
    double entropy = 0.0;
    for (long j = 1; j < 3; ++j) entropy -= s2.at(0, j) * std::log(s2.at(0, j));
    CHECK(ressl_loss(tl, tl.values, 0.5, 0.5) == doctest::Approx(entropy).epsilon(1e-12));

    // uniform queue similarities both sides -> ln 2
    SimilarityLogits utl{Tensor::matrix(1, 3, {0.0, 0.3, 0.3}), RelationalMode::strict};
    CHECK(ressl_loss(utl, utl.values, 0.1, 0.07) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Instance inst = random_instance(2, 4, 7, 9);
    CHECK(ressl_loss(inst.tl, inst.ol, 0.1, 0.07) ==
          doctest::Approx(oracle::ressl(inst.tl.values, inst.ol, 0.1, 0.07)).epsilon(1e-10));

    SimilarityLogits pc = inst.tl;
    pc.mode = RelationalMode::pseudo_code;
    CHECK_THROWS_AS(ressl_loss(pc, inst.ol, 0.1, 0.07), ContractViolation);
}

TEST_CASE("ceil_loss values") {
    // masked positive column (-inf logit): numerator equals denominator
    Tensor masked = Tensor::matrix(1, 3, {-std::numeric_limits<double>::infinity(), 0.3, -0.2});
    CHECK(ceil_loss(masked, 0.1) == 0.0);

    // all logits equal -> -ln(M/(1+M))
    Tensor flat = Tensor::full({2, 5}, 0.4);
    CHECK(ceil_loss(flat, 0.1) == doctest::Approx(-std::log(4.0 / 5.0)).epsilon(1e-12));

    Instance inst = random_instance(3, 6, 5, 31);
    CHECK(ceil_loss(inst.ol, 0.1) == doctest::Approx(oracle::ceil(inst.ol, 0.1)).epsilon(1e-10));
    CHECK(ceil_loss(inst.ol, 0.1) >= 0.0);
}

TEST_CASE("decomposition identity") {
    {
        Instance inst = random_instance(2, 4, 6, 7);
        LossBreakdown b1 = decompose(inst.z1, inst.z2, inst.queue, 1.0, 0.1, 0.07);
        CHECK(std::abs(b1.sce - b1.infonce) <= 1e-12);
        LossBreakdown b0 = decompose(inst.z1, inst.z2, inst.queue, 0.0, 0.1, 0.07);
        CHECK(std::abs(b0.sce - b0.ressl - b0.ceil) <= 1e-9);
    }
    // 100 random draws across shapes and hyperparameters
    Rng meta(77);
    for (int trial = 0; trial < 100; ++trial) {
        Rng r = meta.child("decomp", trial);
        const long b = 1 + static_cast<long>(r.uniform_index(6));
        const long m = 2 + static_cast<long>(r.uniform_index(30));
        const long d = 3 + static_cast<long>(r.uniform_index(12));
        const double lambda = r.uniform();
        const double tau = r.uniform(0.05, 0.3);
        const double tau_m = r.uniform(0.03, 0.2);
        Tensor z1 = random_unit_rows(b, d, r);
        Tensor z2 = random_unit_rows(b, d, r);
        Tensor q = random_unit_rows(m, d, r);
        CHECK(decompose_check(z1, z2, q, lambda, tau, tau_m) <= 1e-9);
    }
}

TEST_CASE("decomposition holds with the batch itself as the queue") {
    // the equations' batch form: negatives are the other batch elements
    Rng r(55);
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng = r.child("batch-form", trial);
        const long b = 2 + static_cast<long>(rng.uniform_index(6));
        Tensor z1 = random_unit_rows(b, 6, rng);
        Tensor z2 = random_unit_rows(b, 6, rng);
        CHECK(decompose_check(z1, z2, z2, rng.uniform(), 0.1, 0.07) <= 1e-9);
    }
}

TEST_CASE("distribution rows sum to one") {
    Rng meta(123);
    for (int trial = 0; trial < 25; ++trial) {
        Rng r = meta.child("sums", trial);
        Instance inst = random_instance(3, 5, 6, r.next());
        for (RelationalMode mode : {RelationalMode::strict, RelationalMode::pseudo_code}) {
            SimilarityLogits tl = inst.tl;
            tl.mode = mode;
            Tensor s2 = relational_distribution(tl, 0.07);
            Tensor w = build_target(s2, r.uniform()).w;
            Tensor p1 = online_distribution(nullptr, inst.ol, 0.1);
            for (const Tensor* t : {&s2, &w, &p1})
                for (long i = 0; i < t->rows(); ++i) {
                    double sum = 0.0;
                    for (long j = 0; j < t->cols(); ++j) sum += t->at(i, j);
                    CHECK(std::abs(sum - 1.0) <= 1e-12);
                }
        }
    }
}

TEST_CASE("monotonicity in the positive logit") {
    // InfoNCE strictly decreases in the positive-column logit, always.
    Rng meta(5);
    for (int trial = 0; trial < 50; ++trial) {
        Rng r = meta.child("mono", trial);
        Instance inst = random_instance(1, 6, 5, r.next());
        Tensor bumped = inst.ol;
        bumped.at(0, 0) += 0.05;
        CHECK(infonce_loss(bumped, 0.1) < infonce_loss(inst.ol, 0.1));

        // SCE with lambda>0 decreases while the online positive mass stays
        // below the target positive mass (= lambda in strict mode); the
        // gradient in the positive logit is (p0 - w0)/tau, so the decrease
        // is strict whenever p0 < lambda over the whole bump.
        const double lambda = 0.6;
        Tensor s2 = relational_distribution(inst.tl, 0.07);
        TargetDistribution w = build_target(s2, lambda);
        Tensor p1 = online_distribution(nullptr, inst.ol, 0.1);
        Tensor p1b = online_distribution(nullptr, bumped, 0.1);
        if (p1.at(0, 0) < lambda && p1b.at(0, 0) < lambda) {
            const double before = sce_loss(nullptr, w, p1).item();
            const double after = sce_loss(nullptr, w, p1b).item();
            CHECK(after < before);
        }
    }
}

TEST_CASE("sce gradients match finite differences; target side gets none") {
    Rng r(404);
    const long b = 3, m = 5, d = 4;
    Tensor raw1 = testsup::random_tensor({b, d}, r);
    Tensor z2 = random_unit_rows(b, d, r);
    Tensor queue = random_unit_rows(m, d, r);
    const double lambda = 0.5, tau = 0.1, tau_m = 0.07;

    SimilarityLogits tl = target_logits(z2, queue, RelationalMode::strict);
    TargetDistribution w = build_target(relational_distribution(tl, tau_m), lambda);

    Graph g;
    Tensor leaf1 = g.leaf(raw1, true);
    Tensor leaf2 = g.leaf(z2, true);  // loss construction must never reach it
    Tensor z1 = g.l2_normalize_rows(leaf1);
    Tensor ol = online_logits(&g, z1, leaf2, queue);
    Tensor p1 = online_distribution(&g, ol, tau);
    Tensor loss = sce_loss(&g, w, p1);
    g.backward(loss);

    CHECK_FALSE(g.has_grad(leaf2));  // stop-gradient contract

    auto eval = [&]() {
        Tensor z = sce::ops::l2_normalize_rows(raw1);
        Tensor o = online_logits(nullptr, z, z2, queue);
        Tensor p = online_distribution(nullptr, o, tau);
        return sce_loss(nullptr, w, p).item();
    };
    std::vector<double> fd = testsup::finite_diff(raw1.data, eval);
    CHECK(testsup::max_rel_err(g.grad(leaf1).data, fd) <= 1e-5);
}

TEST_CASE("symmetrized loss properties") {
    NetworkSpec spec;
    spec.encoder = encoder_spec_from_string("mlp:10,8");
    spec.projector = {2, 8, 6, BnPlacement::none};
    spec.input_dim = 12;
    SiameseModel model = init_model(spec, 3);

    Rng r(88);
    Tensor view = testsup::random_tensor({4, 12}, r, 0.0, 1.0);
    Tensor queue = random_unit_rows(16, 6, r);
    LossConfig cfg;
    cfg.symmetrize = true;

    // identical views and identical online/target parameters (predictor off,
    // fresh init): both directions coincide, so the mean equals either side
    {
        Graph g;
        std::vector<Tensor> leaves;
        SymmetrizedResult res = symmetrized_sce(g, model, view, view, queue, cfg, leaves);
        LossConfig one_sided = cfg;
        one_sided.symmetrize = false;
        Graph g2;
        std::vector<Tensor> leaves2;
        SymmetrizedResult one = symmetrized_sce(g2, model, view, view, queue, one_sided, leaves2);
        CHECK(res.loss.item() == doctest::Approx(one.loss.item()).epsilon(1e-12));
    }

    // swapping the views leaves the value unchanged
    Tensor view2 = testsup::random_tensor({4, 12}, r, 0.0, 1.0);
    double direct, swapped;
    {
        Graph g;
        std::vector<Tensor> leaves;
        direct = symmetrized_sce(g, model, view, view2, queue, cfg, leaves).loss.item();
    }
    {
        Graph g;
        std::vector<Tensor> leaves;
        swapped = symmetrized_sce(g, model, view2, view, queue, cfg, leaves).loss.item();
    }
    CHECK(std::abs(direct - swapped) <= 1e-12);

    // equals the mean of the two one-sided losses computed independently
    LossConfig one_sided = cfg;
    one_sided.symmetrize = false;
    double a, b;
    {
        Graph g;
        std::vector<Tensor> leaves;
        a = symmetrized_sce(g, model, view, view2, queue, one_sided, leaves).loss.item();
    }
    {
        Graph g;
        std::vector<Tensor> leaves;
        b = symmetrized_sce(g, model, view2, view, queue, one_sided, leaves).loss.item();
    }
    CHECK(std::abs(direct - 0.5 * (a + b)) <= 1e-12);
}

TEST_CASE("similarity logits validation") {
    SimilarityLogits bad{Tensor::matrix(1, 3, {0.0, 1.5, 0.0}), RelationalMode::strict};
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
    CHECK_THROWS_AS(relational_distribution(bad, 0.0), ContractViolation);
}
