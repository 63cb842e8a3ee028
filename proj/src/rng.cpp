#include "rfmodel/rng.hpp"

#include "rfmodel/error.hpp"

#include <cmath>
#include <numbers>

namespace rfmodel {

namespace {

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index)
{
    std::uint64_t state = master ^ (index * 0xd1b54a32d192ed03ULL);
    splitmix64(state);
    return splitmix64(state);
}

Rng::Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

double Rng::uniform()
{
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi)
{
    // 53-bit draw on [0, 1] inclusive so both endpoints are reachable.
    const double u = static_cast<double>(engine_() >> 11) / static_cast<double>((1ULL << 53) - 1);
    return lo + (hi - lo) * u;
}

std::uint64_t Rng::below(std::uint64_t n)
{
    if (n == 0)
        fail("Rng::below: n must be positive");
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = engine_();
    } while (x >= limit);
    return x % n;
}

double Rng::normal()
{
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace rfmodel
