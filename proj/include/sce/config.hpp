#pragma once

#include <cstdint>
#include <string>

#include "sce/common.hpp"
#include "sce/loss.hpp"

namespace sce {

// All pretraining hyperparameters. Defaults follow the recommended image
// recipe: lambda 0.5, tau 0.1, tau_m 0.07, strong-alpha/strong-beta views
// with a symmetrized loss, SGD momentum 0.9, 5 warmup epochs, cosine decay,
// EMA momentum 0.996 ramped to 1.
struct TrainConfig {
    double lambda = 0.5;
    double tau = 0.1;
    double tau_m = 0.07;
    double momentum_init = 0.996;
    // Base learning rate at batch 256; the effective rate is
    // lr_init * batch_size / 256 (linear scaling rule).
    double lr_init = 2.0;
    int warmup_epochs = 5;
    int total_epochs = 50;
    int batch_size = 64;
    int queue_size = 256;
    bool symmetrize = true;
    double weight_decay = 1e-4;
    double sgd_momentum = 0.9;
    uint64_t seed = 1;
    std::string relational_mode = "strict";
    std::string aug_online = "strong-alpha";
    std::string aug_target = "strong-beta";
    double crop_scale_lo = 0.2;
    double crop_scale_hi = 1.0;
    int threads = 1;  // 1 = serial reference mode

    std::string encoder = "mlp:128,64";
    int projector_layers = 2;
    int projector_hidden = 128;
    int projector_out = 64;
    std::string projector_bn = "hidden";
    bool predictor = false;
    int predictor_layers = 2;
    int predictor_hidden = 128;

    // Temporal pipeline (video datasets only)
    double clip_duration_s = 2.56;
    int frames_per_clip = 8;
    double temporal_jitter = 0.0;
    double reverse_prob = 0.0;
    double rgb_diff_prob = 0.0;

    void validate() const;
    RelationalMode mode() const { return relational_mode_from_string(relational_mode); }
    double effective_lr() const { return lr_init * static_cast<double>(batch_size) / 256.0; }
};

// Strict line-oriented `key = value` parser. Blank lines and lines starting
// with '#' are ignored. Unknown keys and out-of-range values raise a
// ConfigError carrying the line number.
TrainConfig parse_config_text(const std::string& text, const std::string& origin);
TrainConfig parse_config(const std::string& path);

// Canonical text form; parse(serialize(c)) == c.
std::string serialize_config(const TrainConfig& cfg);

// SCE_SEED environment variable overrides the config seed when set.
void apply_env_overrides(TrainConfig& cfg);

// Network layout for a given input geometry (MLP path uses input_dim only).
NetworkSpec make_network_spec(const TrainConfig& cfg, long input_dim, long input_channels,
                              long input_h, long input_w);

}  // namespace sce
