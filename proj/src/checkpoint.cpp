#include "sce/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sce {

uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : bytes) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

constexpr char kMagic[4] = {'S', 'C', 'E', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw IoError("truncated checkpoint: " + path);
    return v;
}

void put_string(std::ofstream& out, const std::string& s) {
    put<uint32_t>(out, static_cast<uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_string(std::ifstream& in, const std::string& path) {
    const uint32_t len = get<uint32_t>(in, path);
    std::string s(len, '\0');
    in.read(s.data(), len);
    if (!in) throw IoError("truncated checkpoint: " + path);
    return s;
}

void put_tensor(std::ofstream& out, const Tensor& t) {
    put<uint32_t>(out, static_cast<uint32_t>(t.shape.size()));
    for (long e : t.shape) put<uint64_t>(out, static_cast<uint64_t>(e));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
}

Tensor get_tensor(std::ifstream& in, const std::string& path) {
    const uint32_t ndim = get<uint32_t>(in, path);
    std::vector<long> shape(ndim);
    for (uint32_t i = 0; i < ndim; ++i) shape[i] = static_cast<long>(get<uint64_t>(in, path));
    Tensor t = Tensor::zeros(shape);
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!in) throw IoError("truncated checkpoint tensor: " + path);
    return t;
}

void put_param_set(std::ofstream& out, const ParamSet& ps) {
    put<uint32_t>(out, static_cast<uint32_t>(ps.size()));
    for (const Param& p : ps.params) {
        put_string(out, p.name);
        put<uint8_t>(out, p.trainable ? 1 : 0);
        put_tensor(out, p.value);
    }
}

void load_param_set_into(std::ifstream& in, const std::string& path, ParamSet& ps) {
    const uint32_t count = get<uint32_t>(in, path);
    if (count != ps.size())
        throw IoError(format_msg("checkpoint ", path, ": parameter count ", count,
                                 " does not match spec (", ps.size(), ")"));
    for (uint32_t i = 0; i < count; ++i) {
        const std::string name = get_string(in, path);
        const uint8_t trainable = get<uint8_t>(in, path);
        Tensor value = get_tensor(in, path);
        Param& p = ps[i];
        if (p.name != name || p.trainable != (trainable != 0) || p.value.shape != value.shape)
            throw IoError(format_msg("checkpoint ", path, ": parameter ", i, " ('", name,
                                     "') does not match the spec-built model ('", p.name, "')"));
        p.value = std::move(value);
    }
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainingState& state) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    put<uint64_t>(out, fnv1a64(state.config_text));
    put_string(out, state.config_text);

    const NetworkSpec& spec = state.model.spec;
    put<uint32_t>(out, static_cast<uint32_t>(spec.input_dim));
    put<uint32_t>(out, static_cast<uint32_t>(spec.input_channels));
    put<uint32_t>(out, static_cast<uint32_t>(spec.input_h));
    put<uint32_t>(out, static_cast<uint32_t>(spec.input_w));
    put<uint64_t>(out, static_cast<uint64_t>(state.next_step));
    put<uint32_t>(out, static_cast<uint32_t>(state.next_epoch));

    put_param_set(out, state.model.online);
    put_param_set(out, state.model.target);

    put<uint32_t>(out, static_cast<uint32_t>(state.velocities.size()));
    for (const Tensor& v : state.velocities) put_tensor(out, v);

    put<uint8_t>(out, state.has_queue ? 1 : 0);
    if (state.has_queue) {
        put<uint32_t>(out, static_cast<uint32_t>(state.queue_rows.rows()));
        put<uint32_t>(out, static_cast<uint32_t>(state.queue_rows.cols()));
        put<uint32_t>(out, static_cast<uint32_t>(state.queue_fill));
        put<uint32_t>(out, static_cast<uint32_t>(state.queue_cursor));
        out.write(reinterpret_cast<const char*>(state.queue_rows.data.data()),
                  static_cast<std::streamsize>(state.queue_rows.data.size() * sizeof(double)));
    }
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

TrainingState load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad checkpoint magic in " + path + " (expected SCE1)");
    const uint32_t version = get<uint32_t>(in, path);
    if (version != kVersion)
        throw IoError(format_msg("unsupported checkpoint version ", version, " in ", path));
    const uint64_t digest = get<uint64_t>(in, path);
    TrainingState state;
    state.config_text = get_string(in, path);
    if (fnv1a64(state.config_text) != digest)
        throw IoError("checkpoint config digest mismatch in " + path);
    state.config = parse_config_text(state.config_text, path + "(embedded config)");

    const long input_dim = get<uint32_t>(in, path);
    const long input_channels = get<uint32_t>(in, path);
    const long input_h = get<uint32_t>(in, path);
    const long input_w = get<uint32_t>(in, path);
    state.next_step = static_cast<long>(get<uint64_t>(in, path));
    state.next_epoch = static_cast<int>(get<uint32_t>(in, path));

    NetworkSpec spec = make_network_spec(state.config, input_dim, input_channels, input_h, input_w);
    state.model = init_model(spec, state.config.seed);
    load_param_set_into(in, path, state.model.online);
    load_param_set_into(in, path, state.model.target);

    const uint32_t vel_count = get<uint32_t>(in, path);
    if (vel_count != state.model.online.size())
        throw IoError("checkpoint velocity count mismatch in " + path);
    state.velocities.clear();
    for (uint32_t i = 0; i < vel_count; ++i) state.velocities.push_back(get_tensor(in, path));

    state.has_queue = get<uint8_t>(in, path) != 0;
    if (state.has_queue) {
        const long rows = get<uint32_t>(in, path);
        const long cols = get<uint32_t>(in, path);
        state.queue_fill = get<uint32_t>(in, path);
        state.queue_cursor = get<uint32_t>(in, path);
        state.queue_rows = Tensor::zeros({rows, cols});
        in.read(reinterpret_cast<char*>(state.queue_rows.data.data()),
                static_cast<std::streamsize>(state.queue_rows.data.size() * sizeof(double)));
        if (!in) throw IoError("truncated checkpoint queue in " + path);
    }
    return state;
}

}  // namespace sce
