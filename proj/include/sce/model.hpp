#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sce/tensor.hpp"

namespace sce {

enum class BnPlacement { none, hidden, all };
enum class EncoderKind { mlp, cnn };
enum class Branch { online, target };

BnPlacement bn_placement_from_string(const std::string& s);
std::string to_string(BnPlacement p);

struct EncoderSpec {
    EncoderKind kind = EncoderKind::mlp;
    std::vector<int> mlp_widths{128, 64};  // hidden...,out; relu between, last layer linear
    int cnn_c1 = 8, cnn_c2 = 32;           // two 3x3 stride-2 convs, then global average pool
};

struct ProjectorSpec {
    int layers = 2;
    int hidden = 128;
    int out = 64;
    BnPlacement bn = BnPlacement::hidden;
};

struct PredictorSpec {
    int layers = 2;
    int hidden = 128;  // output dim always equals projector out
};

struct NetworkSpec {
    EncoderSpec encoder;
    ProjectorSpec projector;
    bool use_predictor = false;
    PredictorSpec predictor;
    // Input geometry, fixed at model init. MLP flattens to input_dim;
    // the CNN path consumes {B, input_channels, input_h, input_w}.
    long input_dim = 0;
    long input_channels = 3;
    long input_h = 0;
    long input_w = 0;

    long encoder_out_dim() const;
    std::string encoder_string() const;  // "mlp:128,64" / "cnn:8,32"
    void validate() const;
};

EncoderSpec encoder_spec_from_string(const std::string& s);

struct Param {
    std::string name;
    Tensor value;
    bool trainable = true;  // false for batch-norm running statistics
};

struct ParamSet {
    std::vector<Param> params;
    size_t size() const { return params.size(); }
    Param& operator[](size_t i) { return params[i]; }
    const Param& operator[](size_t i) const { return params[i]; }
};

// Online/target parameter pair. The target is written only by ema_update
// (and by init, which copies the online values).
struct SiameseModel {
    NetworkSpec spec;
    ParamSet online;
    ParamSet target;
};

SiameseModel init_model(const NetworkSpec& spec, uint64_t seed);

// Tracked forward through encoder -> projector -> optional predictor ->
// l2-normalize. `leaves` is resized to the parameter count; entry i is the
// graph leaf for parameter i (untracked tensor when the parameter was not
// touched). Reuses leaves across calls so a symmetrized loss accumulates
// into one gradient per parameter.
Tensor forward_online(Graph& g, SiameseModel& model, const Tensor& x, std::vector<Tensor>& leaves);

// Value-only forward through the target branch: encoder -> projector ->
// l2-normalize, never the predictor, never recorded on a graph. Running
// statistics are not updated here; they follow the EMA like weights.
Tensor forward_target(const SiameseModel& model, const Tensor& x);

// Frozen-feature path: encoder output only (pre-projector), eval-mode
// batch norm, l2-normalized.
Tensor encoder_features(const SiameseModel& model, const Tensor& x, Branch branch);

void ema_update(SiameseModel& model, double momentum);

}  // namespace sce
