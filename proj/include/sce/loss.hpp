#pragma once

#include <string>

#include "sce/model.hpp"
#include "sce/tensor.hpp"

namespace sce {

// Two conventions for the target relational distribution over 1+M columns
// (column 0 = positive, columns 1..M = memory queue):
//   strict      - the positive column carries probability 0 and the softmax
//                 runs over the M queue columns only. Default; the
//                 decomposition identity below assumes it.
//   pseudo_code - the positive slot enters the softmax with logit 0, so it
//                 keeps a small probability mass.
enum class RelationalMode { strict, pseudo_code };

RelationalMode relational_mode_from_string(const std::string& s);
std::string to_string(RelationalMode m);

struct Temperatures {
    double tau = 0.1;
    double tau_m = 0.07;
    void validate() const {
        SCE_CHECK(tau > 0.0 && tau_m > 0.0, "temperatures must be positive: tau=", tau,
                  " tau_m=", tau_m);
    }
};

// B x (1+M) cosine similarities, pre-temperature.
struct SimilarityLogits {
    Tensor values;
    RelationalMode mode = RelationalMode::strict;

    long batch() const { return values.rows(); }
    long columns() const { return values.cols(); }
    void validate() const;
};

struct TargetDistribution {
    Tensor w;  // B x (1+M), rows sum to 1, column 0 >= lambda
    double lambda = 0.0;
};

// Entry (i,k) = dot(queries_i, keys_k). Rows of both sides must be unit
// norm (checked to 1e-6). Differentiable through queries only; pass g ==
// nullptr for the plain value path.
Tensor cosine_similarity(Graph* g, const Tensor& queries, const Tensor& keys);

// Target-side logits in queue form: column 0 carries logit 0 (it is masked
// in strict mode and enters the softmax as written in pseudo-code mode),
// columns 1..M are z2 . queue_k.
SimilarityLogits target_logits(const Tensor& z2, const Tensor& queue, RelationalMode mode);

// Online-side logits: column 0 is the paired positive dot, columns 1..M
// the queue dots. Tracked through z1 when g is given.
Tensor online_logits(Graph* g, const Tensor& z1, const Tensor& z2_detached, const Tensor& queue);

Tensor relational_distribution(const SimilarityLogits& logits, double tau_m);

TargetDistribution build_target(const Tensor& s2, double lambda);

// Softmax over all 1+M columns of logits/tau.
Tensor online_distribution(Graph* g, const Tensor& logits, double tau);

// Cross-entropy -(1/B) sum_i sum_k w_ik log p1_ik. Probabilities are
// clamped at 1e-30 before the log; clamp events are counted on the graph
// (tracked path) or in *clamp_count (value path).
Tensor sce_loss(Graph* g, const TargetDistribution& target, const Tensor& p1,
                long* clamp_count = nullptr);

double infonce_loss(const Tensor& logits, double tau);
double ressl_loss(const SimilarityLogits& target, const Tensor& online, double tau, double tau_m);
double ceil_loss(const Tensor& logits, double tau);

struct LossBreakdown {
    double sce = 0.0;
    double infonce = 0.0;
    double ressl = 0.0;
    double ceil = 0.0;
    double residual = 0.0;  // |sce - lambda*infonce - (1-lambda)*(ressl+ceil)|
};

// Evaluates all four losses on the same queue-form instance (strict mode)
// and returns the decomposition residual.
LossBreakdown decompose(const Tensor& z1, const Tensor& z2, const Tensor& queue, double lambda,
                        double tau, double tau_m);
double decompose_check(const Tensor& z1, const Tensor& z2, const Tensor& queue, double lambda,
                       double tau, double tau_m);

struct LossConfig {
    double lambda = 0.5;
    double tau = 0.1;
    double tau_m = 0.07;
    RelationalMode mode = RelationalMode::strict;
    bool symmetrize = true;
};

struct SymmetrizedResult {
    Tensor loss;             // tracked scalar
    LossBreakdown breakdown; // value-side components, averaged over directions
    Tensor z2_t;             // target embedding of view2 (to push first)
    Tensor z1_t;             // target embedding of view1 (pushed second when symmetrized)
    long clamp_count = 0;
    // Online-logit statistics for diagnostics on divergence.
    double logits_min = 0.0, logits_max = 0.0, logits_mean = 0.0;
};

// Full training objective for one batch: online(view1) against
// target(view2), plus the mirrored direction when cfg.symmetrize is set,
// averaged. Target outputs are detached; the queue is used as-is for both
// directions.
SymmetrizedResult symmetrized_sce(Graph& g, SiameseModel& model, const Tensor& view1,
                                  const Tensor& view2, const Tensor& queue, const LossConfig& cfg,
                                  std::vector<Tensor>& leaves);

}  // namespace sce
