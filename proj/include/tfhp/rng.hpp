#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tfhp {

// sub-stream tags inside one path
inline constexpr std::uint32_t kSubordinatorStream = 0;
inline constexpr std::uint32_t kHawkesStream = 1;
inline constexpr std::uint32_t kAuxStream = 2;

/// Engine for one (seed, path, sub-stream) triple. Streams for distinct keys are seeded
/// independently through seed_seq, so results never depend on scheduling order.
class Stream {
public:
    using result_type = std::mt19937_64::result_type;

    Stream(std::uint64_t seed, std::uint64_t path, std::uint32_t substream) : engine_(make_engine(seed, path, substream)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on the open interval (0, 1).
    double uniform_open() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

    double exponential() { return -std::log(uniform_open()); }

    std::mt19937_64& engine() { return engine_; }

private:
    static std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t path, std::uint32_t substream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), substream};
        return std::mt19937_64(seq);
    }

    std::mt19937_64 engine_;
};

}  // namespace tfhp
