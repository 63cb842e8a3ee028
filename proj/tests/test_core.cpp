#include "rfmodel/error.hpp"
#include "rfmodel/fft.hpp"
#include "rfmodel/rng.hpp"
#include "rfmodel/waveform.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace rfmodel;

TEST(Rng, SameSeedSameSequence)
{
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i)
        ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, StreamsDiffer)
{
    Rng a(42, 0), b(42, 1);
    int equal = 0;
    for (int i = 0; i < 100; ++i)
        equal += a.next_u64() == b.next_u64();
    EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformRangeAndMean)
{
    Rng r(7);
    double sum = 0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Rng, BelowCoversRangeWithoutOverflow)
{
    Rng r(3);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.below(7);
        ASSERT_LT(v, 7u);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7u);
    EXPECT_THROW(r.below(0), Error);
}

TEST(Rng, NormalMoments)
{
    Rng r(11);
    double s = 0, s2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
}

TEST(Rng, DeriveSeedIsStableAndSpreads)
{
    EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
    EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
    EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

TEST(Waveform, SegmentAndValidate)
{
    Waveform w{{1, 2, 3, 4, 5}, 10.0};
    const auto s = w.segment(1, 3);
    EXPECT_EQ(s.samples, (std::vector<double>{2, 3, 4}));
    EXPECT_EQ(s.sample_rate_hz, 10.0);
    EXPECT_THROW(w.segment(3, 3), Error);
    EXPECT_NO_THROW(validate(w));
    EXPECT_THROW(validate(Waveform{{}, 1.0}), Error);
    EXPECT_THROW(validate(Waveform{{1.0}, 0.0}), Error);
    EXPECT_THROW(validate(Waveform{{std::nan("")}, 1.0}), Error);
}

TEST(Fft, MatchesDirectDftForOddLength)
{
    const std::size_t n = 15;
    std::vector<double> x(n);
    Rng r(5);
    for (auto& v : x)
        v = r.uniform(-1, 1);
    const auto X = fft::forward(std::span<const double>(x));
    ASSERT_EQ(X.size(), n);
    for (std::size_t k = 0; k < n; ++k) {
        fft::Complex acc = 0;
        for (std::size_t t = 0; t < n; ++t)
            acc += x[t] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * t) / double(n));
        EXPECT_NEAR(std::abs(X[k] - acc), 0.0, 1e-12);
    }
}

TEST(Fft, InverseRoundTrip)
{
    std::vector<fft::Complex> x(64);
    Rng r(9);
    for (auto& v : x)
        v = {r.uniform(-1, 1), r.uniform(-1, 1)};
    const auto y = fft::inverse(fft::forward(std::span<const fft::Complex>(x)));
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_NEAR(std::abs(y[i] - x[i]), 0.0, 1e-14);
}
