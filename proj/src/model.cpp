#include "sce/model.hpp"

#include <cmath>
#include <sstream>

#include "sce/rng.hpp"

namespace sce {

namespace {
constexpr double kBnEps = 1e-5;
constexpr double kBnStatMomentum = 0.1;  // running = (1-m)*running + m*batch
}  // namespace

BnPlacement bn_placement_from_string(const std::string& s) {
    if (s == "none") return BnPlacement::none;
    if (s == "hidden") return BnPlacement::hidden;
    if (s == "all") return BnPlacement::all;
    throw ContractViolation("unknown batch-norm placement '" + s + "' (none|hidden|all)");
}

std::string to_string(BnPlacement p) {
    switch (p) {
        case BnPlacement::none: return "none";
        case BnPlacement::hidden: return "hidden";
        case BnPlacement::all: return "all";
    }
    return "none";
}

EncoderSpec encoder_spec_from_string(const std::string& s) {
    EncoderSpec spec;
    auto colon = s.find(':');
    const std::string kind = s.substr(0, colon);
    const std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);
    std::vector<int> nums;
    std::stringstream ss(rest);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            nums.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ContractViolation("bad encoder descriptor '" + s + "'");
        }
    }
    if (kind == "mlp") {
        spec.kind = EncoderKind::mlp;
        if (!nums.empty()) spec.mlp_widths = nums;
        SCE_CHECK(!spec.mlp_widths.empty(), "mlp encoder needs at least one width");
    } else if (kind == "cnn") {
        spec.kind = EncoderKind::cnn;
        SCE_CHECK(nums.size() == 2, "cnn encoder descriptor must be cnn:c1,c2");
        spec.cnn_c1 = nums[0];
        spec.cnn_c2 = nums[1];
    } else {
        throw ContractViolation("unknown encoder kind '" + kind + "' (mlp|cnn)");
    }
    return spec;
}

long NetworkSpec::encoder_out_dim() const {
    if (encoder.kind == EncoderKind::mlp) return encoder.mlp_widths.back();
    return encoder.cnn_c2;
}

std::string NetworkSpec::encoder_string() const {
    std::ostringstream os;
    if (encoder.kind == EncoderKind::mlp) {
        os << "mlp:";
        for (size_t i = 0; i < encoder.mlp_widths.size(); ++i)
            os << (i ? "," : "") << encoder.mlp_widths[i];
    } else {
        os << "cnn:" << encoder.cnn_c1 << "," << encoder.cnn_c2;
    }
    return os.str();
}

void NetworkSpec::validate() const {
    SCE_CHECK(input_dim > 0, "network spec: input_dim must be set before init");
    SCE_CHECK(projector.layers >= 1, "projector needs at least one layer");
    SCE_CHECK(projector.hidden > 0 && projector.out > 0, "projector dims must be positive");
    if (encoder.kind == EncoderKind::mlp) {
        SCE_CHECK(!encoder.mlp_widths.empty(), "mlp encoder needs at least one width");
        for (int w : encoder.mlp_widths) SCE_CHECK(w > 0, "mlp widths must be positive");
    } else {
        SCE_CHECK(encoder.cnn_c1 > 0 && encoder.cnn_c2 > 0, "cnn channels must be positive");
        SCE_CHECK(input_h >= 4 && input_w >= 4, "cnn input must be at least 4x4");
        SCE_CHECK(input_dim == input_channels * input_h * input_w,
                  "cnn input_dim must equal channels*h*w");
    }
    if (use_predictor) {
        SCE_CHECK(predictor.layers >= 1, "predictor needs at least one layer");
        SCE_CHECK(predictor.hidden > 0, "predictor hidden dim must be positive");
    }
}

namespace {

struct LayerPlan {
    long in = 0, out = 0;
    bool bn = false;
    bool relu = false;
    std::string prefix;
};

// Linear stack layout shared by projector and predictor.
std::vector<LayerPlan> head_plan(const std::string& prefix, long in, int layers, int hidden,
                                 int out, BnPlacement bn) {
    std::vector<LayerPlan> plan;
    for (int l = 0; l < layers; ++l) {
        const bool last = l == layers - 1;
        LayerPlan lp;
        lp.in = l == 0 ? in : hidden;
        lp.out = last ? out : hidden;
        lp.relu = !last;
        lp.bn = last ? bn == BnPlacement::all : bn != BnPlacement::none;
        lp.prefix = prefix + std::to_string(l);
        plan.push_back(lp);
    }
    return plan;
}

// Linear layers in network order. CNN conv layers are handled separately;
// this covers the MLP encoder plus projector/predictor heads.
std::vector<LayerPlan> linear_plan(const NetworkSpec& spec, bool include_projector,
                                   bool include_predictor) {
    std::vector<LayerPlan> plan;
    if (spec.encoder.kind == EncoderKind::mlp) {
        long in = spec.input_dim;
        for (size_t l = 0; l < spec.encoder.mlp_widths.size(); ++l) {
            LayerPlan lp;
            lp.in = in;
            lp.out = spec.encoder.mlp_widths[l];
            lp.relu = l + 1 < spec.encoder.mlp_widths.size();
            lp.prefix = "enc" + std::to_string(l);
            plan.push_back(lp);
            in = lp.out;
        }
    }
    if (include_projector) {
        auto proj = head_plan("proj", spec.encoder_out_dim(), spec.projector.layers,
                              spec.projector.hidden, spec.projector.out, spec.projector.bn);
        plan.insert(plan.end(), proj.begin(), proj.end());
        if (include_predictor && spec.use_predictor) {
            auto pred = head_plan("pred", spec.projector.out, spec.predictor.layers,
                                  spec.predictor.hidden, spec.projector.out, BnPlacement::hidden);
            plan.insert(plan.end(), pred.begin(), pred.end());
        }
    }
    return plan;
}

void append_linear_params(ParamSet& ps, const LayerPlan& lp, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(lp.in));
    Tensor w = Tensor::zeros({lp.in, lp.out});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    ps.params.push_back({lp.prefix + ".w", std::move(w), true});
    ps.params.push_back({lp.prefix + ".b", Tensor::zeros({1, lp.out}), true});
    if (lp.bn) {
        ps.params.push_back({lp.prefix + ".bn.gamma", Tensor::full({1, lp.out}, 1.0), true});
        ps.params.push_back({lp.prefix + ".bn.beta", Tensor::zeros({1, lp.out}), true});
        ps.params.push_back({lp.prefix + ".bn.rmean", Tensor::zeros({1, lp.out}), false});
        ps.params.push_back({lp.prefix + ".bn.rvar", Tensor::full({1, lp.out}, 1.0), false});
    }
}

void append_conv_params(ParamSet& ps, const std::string& name, long in_ch, long out_ch, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch * 9));
    Tensor w = Tensor::zeros({out_ch, in_ch, 3, 3});
    for (double& v : w.data) v = rng.uniform(-bound, bound);
    ps.params.push_back({name + ".w", std::move(w), true});
    ps.params.push_back({name + ".b", Tensor::zeros({out_ch}), true});
}

ParamSet build_params(const NetworkSpec& spec, Rng& rng) {
    ParamSet ps;
    if (spec.encoder.kind == EncoderKind::cnn) {
        append_conv_params(ps, "enc0", spec.input_channels, spec.encoder.cnn_c1, rng);
        append_conv_params(ps, "enc1", spec.encoder.cnn_c1, spec.encoder.cnn_c2, rng);
    }
    for (const LayerPlan& lp : linear_plan(spec, true, true)) append_linear_params(ps, lp, rng);
    return ps;
}

// Shared forward walker. GraphOpsCtx records a tape for the online branch;
// ValueOpsCtx computes plain values. Both use train-mode batch-norm math
// unless eval stats are requested; only the online branch refreshes
// running statistics.
struct GraphOpsCtx {
    Graph* g;
    ParamSet* ps;
    std::vector<Tensor>* leaves;

    Tensor param(size_t i) {
        Tensor& slot = (*leaves)[i];
        if (slot.node < 0) slot = g->leaf((*ps)[i].value, (*ps)[i].trainable);
        return slot;
    }
    Tensor linear(const Tensor& x, size_t wi) { return g->add_bias(g->matmul(x, param(wi)), param(wi + 1)); }
    Tensor relu(const Tensor& x) { return g->relu(x); }
    Tensor conv(const Tensor& x, size_t wi) { return g->conv2d(x, param(wi), param(wi + 1), 2, 1); }
    Tensor gap(const Tensor& x) { return g->global_avg_pool(x); }
    Tensor reshape(const Tensor& x, std::vector<long> s) { return g->reshape(x, std::move(s)); }
    Tensor batchnorm(const Tensor& x, size_t gi) {
        Tensor mean, var;
        Tensor y = g->batchnorm_cols(x, param(gi), param(gi + 1), kBnEps, &mean, &var);
        Tensor& rm = (*ps)[gi + 2].value;
        Tensor& rv = (*ps)[gi + 3].value;
        for (size_t j = 0; j < rm.data.size(); ++j) {
            rm.data[j] = (1.0 - kBnStatMomentum) * rm.data[j] + kBnStatMomentum * mean.data[j];
            rv.data[j] = (1.0 - kBnStatMomentum) * rv.data[j] + kBnStatMomentum * var.data[j];
        }
        return y;
    }
};

struct ValueOpsCtx {
    const ParamSet* ps;
    bool batch_stats = true;  // train-mode math; false = eval via running stats

    Tensor param(size_t i) const { return (*ps)[i].value; }
    Tensor linear(const Tensor& x, size_t wi) const {
        return ops::add_bias(ops::matmul(x, param(wi)), param(wi + 1));
    }
    Tensor relu(const Tensor& x) const { return ops::relu(x); }
    Tensor conv(const Tensor& x, size_t wi) const {
        return ops::conv2d(x, param(wi), param(wi + 1), 2, 1);
    }
    Tensor gap(const Tensor& x) const { return ops::global_avg_pool(x); }
    Tensor reshape(const Tensor& x, std::vector<long> s) const { return ops::reshape(x, std::move(s)); }
    Tensor batchnorm(const Tensor& x, size_t gi) const {
        if (batch_stats) return ops::batchnorm_cols_train(x, param(gi), param(gi + 1), kBnEps).y;
        return ops::batchnorm_cols_eval(x, param(gi), param(gi + 1), (*ps)[gi + 2].value,
                                        (*ps)[gi + 3].value, kBnEps);
    }
};

template <typename Ctx>
Tensor run_forward(Ctx& ctx, const NetworkSpec& spec, const Tensor& x, bool include_projector,
                   bool include_predictor) {
    SCE_CHECK(x.ndim() == 2 && x.cols() == spec.input_dim,
              "forward: input must be B x ", spec.input_dim);
    size_t pi = 0;
    Tensor h = x;
    if (spec.encoder.kind == EncoderKind::cnn) {
        const long b = h.rows();
        h = ctx.reshape(h, {b, spec.input_channels, spec.input_h, spec.input_w});
        h = ctx.relu(ctx.conv(h, pi));
        pi += 2;
        h = ctx.relu(ctx.conv(h, pi));
        pi += 2;
        h = ctx.gap(h);
    }
    for (const LayerPlan& lp : linear_plan(spec, include_projector, include_predictor)) {
        h = ctx.linear(h, pi);
        pi += 2;
        if (lp.bn) {
            h = ctx.batchnorm(h, pi);
            pi += 4;
        }
        if (lp.relu) h = ctx.relu(h);
    }
    return h;
}

}  // namespace

SiameseModel init_model(const NetworkSpec& spec, uint64_t seed) {
    spec.validate();
    SiameseModel m;
    m.spec = spec;
    Rng rng = Rng(seed).child("model-init");
    m.online = build_params(spec, rng);
    m.target = m.online;  // exact copy at step 0
    return m;
}

Tensor forward_online(Graph& g, SiameseModel& model, const Tensor& x, std::vector<Tensor>& leaves) {
    leaves.resize(model.online.size());
    GraphOpsCtx ctx{&g, &model.online, &leaves};
    Tensor z = run_forward(ctx, model.spec, x, true, true);
    return g.l2_normalize_rows(z);
}

Tensor forward_target(const SiameseModel& model, const Tensor& x) {
    ValueOpsCtx ctx{&model.target, true};
    Tensor z = run_forward(ctx, model.spec, x, true, false);
    return ops::l2_normalize_rows(z);
}

Tensor encoder_features(const SiameseModel& model, const Tensor& x, Branch branch) {
    ValueOpsCtx ctx{branch == Branch::online ? &model.online : &model.target, false};
    Tensor z = run_forward(ctx, model.spec, x, false, false);
    return ops::l2_normalize_rows(z);
}

void ema_update(SiameseModel& model, double momentum) {
    SCE_CHECK(momentum >= 0.0 && momentum <= 1.0, "ema momentum must lie in [0,1], got ", momentum);
    for (size_t i = 0; i < model.online.size(); ++i) {
        Tensor& t = model.target[i].value;
        const Tensor& s = model.online[i].value;
        for (size_t j = 0; j < t.data.size(); ++j)
            t.data[j] = momentum * t.data[j] + (1.0 - momentum) * s.data[j];
    }
}

}  // namespace sce
