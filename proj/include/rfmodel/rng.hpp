#pragma once

#include <cstdint>
#include <random>

namespace rfmodel {

/// Seedable generator with a platform-independent output sequence.
///
/// The engine is std::mt19937_64, whose sequence is fixed by the standard.
/// The distributions are implemented here instead of using <random>'s
/// distribution classes, whose algorithms differ between standard libraries.
/// Seeds are expanded with SplitMix64 so that (seed, stream) pairs give
/// unrelated sequences.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform on [lo, hi].
    double uniform(double lo, double hi);

    /// Uniform integer on [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    /// Standard normal via Box-Muller (one draw per pair of uniforms).
    double normal();

private:
    std::mt19937_64 engine_;
};

/// Mixes a master seed with an index into a child seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace rfmodel
