#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace sce {

// Deterministic random streams. Every consumer derives its own stream from
// the master seed plus a tag path, e.g. rng.child("aug", epoch, step, branch,
// sample). Streams depend only on (seed, tags), never on call order elsewhere,
// which is what makes runs resumable and batches parallelizable.
//
// All derived quantities are defined from raw mt19937_64 output:
//   uniform()            -> (next() >> 11) * 2^-53, in [0, 1)
//   uniform(a, b)        -> a + (b - a) * uniform()
//   uniform_index(n)     -> floor(uniform() * n), in [0, n)
//   bernoulli(p)         -> uniform() < p
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

    uint64_t next() { return engine_(); }

    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    size_t uniform_index(size_t n) {
        if (n == 0) return 0;
        size_t i = static_cast<size_t>(uniform() * static_cast<double>(n));
        return i >= n ? n - 1 : i;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller on two uniforms.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // In-place Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = uniform_index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

    template <typename... Tags>
    Rng child(const Tags&... tags) const {
        uint64_t h = 0xcbf29ce484222325ull;
        mix(h, seed_);
        (mix_tag(h, tags), ...);
        return Rng(h);
    }

    uint64_t seed() const { return seed_; }

private:
    static void mix(uint64_t& h, uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xffull;
            h *= 0x100000001b3ull;
        }
    }
    static void mix_tag(uint64_t& h, uint64_t v) { mix(h, v); }
    static void mix_tag(uint64_t& h, int v) { mix(h, static_cast<uint64_t>(static_cast<int64_t>(v))); }
    static void mix_tag(uint64_t& h, long v) { mix(h, static_cast<uint64_t>(static_cast<int64_t>(v))); }
    static void mix_tag(uint64_t& h, std::string_view s) {
        for (char c : s) {
            h ^= static_cast<uint8_t>(c);
            h *= 0x100000001b3ull;
        }
    }
    static void mix_tag(uint64_t& h, const char* s) { mix_tag(h, std::string_view(s)); }

    std::mt19937_64 engine_;
    uint64_t seed_ = 0;
};

inline Rng make_rng(uint64_t seed) { return Rng(seed); }

}  // namespace sce
