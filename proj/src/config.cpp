#include "sce/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sce/augment.hpp"
#include "sce/model.hpp"

namespace sce {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError(msg); };
    if (lambda < 0.0 || lambda > 1.0)
        fail(format_msg("lambda = ", lambda, " outside [0,1]"));
    if (tau <= 0.0) fail(format_msg("tau = ", tau, " must be positive"));
    if (tau_m <= 0.0) fail(format_msg("tau_m = ", tau_m, " must be positive"));
    if (momentum_init < 0.0 || momentum_init > 1.0)
        fail(format_msg("momentum_init = ", momentum_init, " outside [0,1]"));
    if (lr_init <= 0.0) fail(format_msg("lr_init = ", lr_init, " must be positive"));
    if (warmup_epochs < 0) fail("warmup_epochs must be non-negative");
    if (total_epochs < 1) fail("total_epochs must be at least 1");
    if (warmup_epochs > total_epochs)
        fail(format_msg("warmup_epochs = ", warmup_epochs, " exceeds total_epochs = ", total_epochs));
    if (batch_size < 1) fail("batch_size must be at least 1");
    if (queue_size < batch_size)
        fail(format_msg("queue_size = ", queue_size, " must be >= batch_size = ", batch_size));
    if (weight_decay < 0.0) fail("weight_decay must be non-negative");
    if (sgd_momentum < 0.0 || sgd_momentum >= 1.0)
        fail(format_msg("sgd_momentum = ", sgd_momentum, " outside [0,1)"));
    if (threads < 1) fail("threads must be at least 1");
    if (crop_scale_lo <= 0.0 || crop_scale_lo > crop_scale_hi || crop_scale_hi > 1.0)
        fail("crop scale range must satisfy 0 < lo <= hi <= 1");
    if (projector_layers < 1 || projector_hidden < 1 || projector_out < 1)
        fail("projector dimensions must be positive");
    if (predictor && (predictor_layers < 1 || predictor_hidden < 1))
        fail("predictor dimensions must be positive");
    if (clip_duration_s <= 0.0) fail("clip_duration_s must be positive");
    if (frames_per_clip < 1) fail("frames_per_clip must be at least 1");
    if (temporal_jitter < 0.0) fail("temporal_jitter must be non-negative");
    if (reverse_prob < 0.0 || reverse_prob > 1.0)
        fail(format_msg("reverse_prob = ", reverse_prob, " outside [0,1]"));
    if (rgb_diff_prob < 0.0 || rgb_diff_prob > 1.0)
        fail(format_msg("rgb_diff_prob = ", rgb_diff_prob, " outside [0,1]"));
    try {
        (void)relational_mode_from_string(relational_mode);
        (void)presets::by_name(aug_online);
        (void)presets::by_name(aug_target);
        (void)bn_placement_from_string(projector_bn);
        (void)encoder_spec_from_string(encoder);
    } catch (const ContractViolation& e) {
        fail(e.what());
    }
}

namespace {

struct Field {
    const char* key;
    std::function<std::string(const TrainConfig&)> get;
    std::function<void(TrainConfig&, const std::string&)> set;
};

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& v, const char* key) {
    size_t pos = 0;
    double out;
    try {
        out = std::stod(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(format_msg("bad numeric value '", v, "' for ", key));
    }
    if (pos != v.size()) throw ConfigError(format_msg("bad numeric value '", v, "' for ", key));
    return out;
}

long parse_long(const std::string& v, const char* key) {
    size_t pos = 0;
    long out;
    try {
        out = std::stol(v, &pos);
    } catch (const std::exception&) {
        throw ConfigError(format_msg("bad integer value '", v, "' for ", key));
    }
    if (pos != v.size()) throw ConfigError(format_msg("bad integer value '", v, "' for ", key));
    return out;
}

bool parse_bool(const std::string& v, const char* key) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(format_msg("bad boolean value '", v, "' for ", key));
}

#define DOUBLE_FIELD(name)                                                       \
    Field{#name, [](const TrainConfig& c) { return fmt_double(c.name); },        \
          [](TrainConfig& c, const std::string& v) { c.name = parse_double(v, #name); }}
#define INT_FIELD(name)                                                          \
    Field{#name, [](const TrainConfig& c) { return std::to_string(c.name); },    \
          [](TrainConfig& c, const std::string& v) { c.name = static_cast<int>(parse_long(v, #name)); }}
#define BOOL_FIELD(name)                                                         \
    Field{#name, [](const TrainConfig& c) { return c.name ? "true" : "false"; }, \
          [](TrainConfig& c, const std::string& v) { c.name = parse_bool(v, #name); }}
#define STRING_FIELD(name)                                                       \
    Field{#name, [](const TrainConfig& c) { return c.name; },                    \
          [](TrainConfig& c, const std::string& v) { c.name = v; }}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        DOUBLE_FIELD(lambda),
        DOUBLE_FIELD(tau),
        DOUBLE_FIELD(tau_m),
        DOUBLE_FIELD(momentum_init),
        DOUBLE_FIELD(lr_init),
        INT_FIELD(warmup_epochs),
        INT_FIELD(total_epochs),
        INT_FIELD(batch_size),
        INT_FIELD(queue_size),
        BOOL_FIELD(symmetrize),
        DOUBLE_FIELD(weight_decay),
        DOUBLE_FIELD(sgd_momentum),
        Field{"seed", [](const TrainConfig& c) { return std::to_string(c.seed); },
              [](TrainConfig& c, const std::string& v) {
                  c.seed = static_cast<uint64_t>(parse_long(v, "seed"));
              }},
        STRING_FIELD(relational_mode),
        STRING_FIELD(aug_online),
        STRING_FIELD(aug_target),
        DOUBLE_FIELD(crop_scale_lo),
        DOUBLE_FIELD(crop_scale_hi),
        INT_FIELD(threads),
        STRING_FIELD(encoder),
        INT_FIELD(projector_layers),
        INT_FIELD(projector_hidden),
        INT_FIELD(projector_out),
        STRING_FIELD(projector_bn),
        BOOL_FIELD(predictor),
        INT_FIELD(predictor_layers),
        INT_FIELD(predictor_hidden),
        DOUBLE_FIELD(clip_duration_s),
        INT_FIELD(frames_per_clip),
        DOUBLE_FIELD(temporal_jitter),
        DOUBLE_FIELD(reverse_prob),
        DOUBLE_FIELD(rgb_diff_prob),
    };
    return f;
}

#undef DOUBLE_FIELD
#undef INT_FIELD
#undef BOOL_FIELD
#undef STRING_FIELD

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

TrainConfig parse_config_text(const std::string& text, const std::string& origin) {
    TrainConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError(format_msg(origin, ":", line_no, ": expected 'key = value', got '",
                                         stripped, "'"));
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        bool known = false;
        for (const Field& f : fields()) {
            if (key == f.key) {
                try {
                    f.set(cfg, value);
                } catch (const ConfigError& e) {
                    throw ConfigError(format_msg(origin, ":", line_no, ": ", e.what()));
                }
                known = true;
                break;
            }
        }
        if (!known)
            throw ConfigError(format_msg(origin, ":", line_no, ": unknown key '", key, "'"));
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(format_msg(origin, ": ", e.what()));
    }
    return cfg;
}

TrainConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string serialize_config(const TrainConfig& cfg) {
    std::ostringstream out;
    for (const Field& f : fields()) out << f.key << " = " << f.get(cfg) << "\n";
    return out.str();
}

void apply_env_overrides(TrainConfig& cfg) {
    if (const char* env = std::getenv("SCE_SEED")) {
        try {
            cfg.seed = static_cast<uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigError(format_msg("SCE_SEED is not an integer: '", env, "'"));
        }
    }
}

NetworkSpec make_network_spec(const TrainConfig& cfg, long input_dim, long input_channels,
                              long input_h, long input_w) {
    NetworkSpec spec;
    spec.encoder = encoder_spec_from_string(cfg.encoder);
    spec.projector = {cfg.projector_layers, cfg.projector_hidden, cfg.projector_out,
                      bn_placement_from_string(cfg.projector_bn)};
    spec.use_predictor = cfg.predictor;
    spec.predictor = {cfg.predictor_layers, cfg.predictor_hidden};
    spec.input_dim = input_dim;
    spec.input_channels = input_channels;
    spec.input_h = input_h;
    spec.input_w = input_w;
    return spec;
}

}  // namespace sce
