#pragma once

#include <cstdint>
#include <random>

namespace mecsched {

/// Seeded 64-bit generator with portable uniform draws.
///
/// The standard distribution classes are implementation-defined, so a run
/// would not reproduce across standard libraries. The draws here depend only
/// on the mt19937_64 output sequence, which the standard pins down.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream derived from a run seed and a stream id.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id),
                          static_cast<std::uint32_t>(stream_id >> 32)};
        Rng rng(0);
        rng.engine_.seed(seq);
        return rng;
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [-limit, limit).
    double uniform_symmetric(double limit) { return (2.0 * uniform() - 1.0) * limit; }

    /// Integer uniform on the closed range [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<std::int64_t>(engine_());
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t draw = engine_();
        while (draw >= limit) draw = engine_();
        return lo + static_cast<std::int64_t>(draw % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
};

/// Stream ids for the per-run generators.
enum class RngStream : std::uint64_t {
    workload = 1,
    exploration = 2,
    replay = 3,
    init = 4,
};

inline Rng make_stream(std::uint64_t seed, RngStream stream) {
    return Rng::stream(seed, static_cast<std::uint64_t>(stream));
}

}  // namespace mecsched
