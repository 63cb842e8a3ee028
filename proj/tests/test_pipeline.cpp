#include "rfmodel/error.hpp"
#include "rfmodel/pipeline.hpp"
#include "rfmodel/rng.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

using namespace rfmodel;
using namespace rfmodel::pipeline;
using testbench::CapturePair;

namespace {

// y[n] = sign * x[n - d], zero filled.
Waveform shifted(const Waveform& x, long d, double sign = 1.0)
{
    Waveform y{std::vector<double>(x.size(), 0.0), x.sample_rate_hz};
    for (long n = 0; n < long(x.size()); ++n) {
        const long src = n - d;
        if (src >= 0 && src < long(x.size()))
            y.samples[std::size_t(n)] = sign * x.samples[std::size_t(src)];
    }
    return y;
}

CapturePair ramp_pair(std::size_t n)
{
    CapturePair p;
    p.stimulus.samples.resize(n);
    p.response.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        p.stimulus.samples[i] = double(i + 1);
        p.response.samples[i] = 100.0 + double(i);
    }
    return p;
}

}  // namespace

TEST(Delay, PureShift)
{
    const auto x = siggen::gen_uniform_noise(4096, 1.0, 1.0, 1);
    const auto e = estimate_delay(x, shifted(x, 17));
    EXPECT_EQ(e.lag, 17);
    EXPECT_EQ(e.sign, 1);
    EXPECT_GT(e.peak, 0);
}

TEST(Delay, InvertingShift)
{
    const auto x = siggen::gen_uniform_noise(4096, 1.0, 1.0, 2);
    const auto e = estimate_delay(x, shifted(x, 9, -1.0));
    EXPECT_EQ(e.lag, 9);
    EXPECT_EQ(e.sign, -1);
}

TEST(Delay, Pw210CaptureRecoversConfiguredDelay)
{
    const auto dut = dutsim::pw210_like();
    for (std::uint64_t s = 0; s < 5; ++s) {
        const auto x = siggen::gen_uniform_noise(8192, 0.6, 1.0, s);
        EXPECT_EQ(estimate_delay(x, dutsim::simulate(dut, x, 100 + s)).lag, long(dut.delay_samples));
    }
}

TEST(Delay, RandomShiftsIncludingNegative)
{
    Rng rng(4);
    const auto x = siggen::gen_uniform_noise(2048, 1.0, 1.0, 3);
    for (int i = 0; i < 200; ++i) {
        const long d = long(rng.below(1025)) - 512;
        const double sign = rng.below(2) ? 1.0 : -1.0;
        const auto e = estimate_delay(x, shifted(x, d, sign), 512);
        ASSERT_EQ(e.lag, d);
        ASSERT_EQ(e.sign, int(sign));
    }
}

TEST(Delay, TieBreaksTowardSmallestLagThenPositive)
{
    // A constant pulse pair correlates equally at +1 and -1.
    Waveform x{{0, 0, 0, 1, 0, 0, 0, 0}, 1.0};
    Waveform y{{0, 0, 1, 0, 1, 0, 0, 0}, 1.0};
    EXPECT_EQ(estimate_delay(x, y, 3).lag, 1);
    Waveform z{{0, 0, 1, 1, 1, 0, 0, 0}, 1.0};
    EXPECT_EQ(estimate_delay(x, z, 3).lag, 0);
}

TEST(Delay, Errors)
{
    const Waveform zero{std::vector<double>(64, 0.0), 1.0};
    EXPECT_THROW(estimate_delay(zero, zero, 8), Error);
    const auto x = siggen::gen_uniform_noise(64, 1.0, 1.0, 1);
    EXPECT_THROW(estimate_delay(x, x, 33), Error);
    EXPECT_THROW(estimate_delay(x, x.segment(0, 63), 8), Error);
}

TEST(Align, IdentityAndLengths)
{
    const auto p = ramp_pair(50000);
    const auto same = align(p, 0);
    EXPECT_EQ(same.stimulus, p.stimulus);
    EXPECT_EQ(same.response, p.response);
    const auto a = align(p, 17);
    EXPECT_EQ(a.size(), 49983u);
    EXPECT_EQ(a.response.size(), 49983u);
    EXPECT_EQ(a.stimulus.samples[0], 1.0);
    EXPECT_EQ(a.response.samples[0], 117.0);
    const auto b = align(p, -5);
    EXPECT_EQ(b.size(), 49995u);
    EXPECT_EQ(b.stimulus.samples[0], 6.0);
    EXPECT_EQ(b.response.samples[0], 100.0);
    EXPECT_THROW(align(p, 50000), Error);
}

TEST(Align, FixedPoint)
{
    const auto x = siggen::gen_uniform_noise(4096, 1.0, 1.0, 6);
    CapturePair p{x, shifted(x, 33), {}};
    const auto a = align(p, estimate_delay(p.stimulus, p.response).lag);
    EXPECT_EQ(estimate_delay(a.stimulus, a.response).lag, 0);
}

TEST(Norm, FitsGlobalPerChannelRange)
{
    CapturePair a{{{-0.6, 0.1, 0.6}, 1.0}, {{-3, 0, 2}, 1.0}, {}};
    CapturePair b{{{-0.2, 0.2, 0.3}, 1.0}, {{-1, 5, 0}, 1.0}, {}};
    const std::vector<CapturePair> pairs{a, b};
    const auto s = fit_norm_stats(pairs);
    EXPECT_EQ(s.in_min, -0.6);
    EXPECT_EQ(s.in_max, 0.6);
    EXPECT_EQ(s.out_min, -3);
    EXPECT_EQ(s.out_max, 5);
}

TEST(Norm, RoundTripAndMonotone)
{
    const NormStats s{-0.6, 0.6, -3.5, 4.25};
    Rng rng(1);
    double prev = -1e9, prev_n = -1e9;
    std::vector<double> xs;
    for (int i = 0; i < 1000; ++i)
        xs.push_back(rng.uniform(-50, 50));
    std::sort(xs.begin(), xs.end());
    for (double x : xs) {
        EXPECT_NEAR(s.denormalize_input(s.normalize_input(x)), x, 1e-12 * std::max(1.0, std::abs(x)));
        EXPECT_NEAR(s.denormalize_output(s.normalize_output(x)), x, 1e-12 * std::max(1.0, std::abs(x)));
        const double n = s.normalize_input(x);
        if (x > prev)
            EXPECT_GT(n, prev_n);
        prev = x;
        prev_n = n;
    }
    EXPECT_GT(s.normalize_input(1.2), 1.0);  // passed through, not clamped
}

TEST(Norm, Errors)
{
    EXPECT_THROW(fit_norm_stats({}), Error);
    CapturePair flat{{{1, 1, 1}, 1.0}, {{0, 1, 2}, 1.0}, {}};
    EXPECT_THROW(fit_norm_stats(std::vector<CapturePair>{flat}), Error);
}

TEST(Windows, IndexingConvention)
{
    CapturePair p{{{1, 2, 3, 4, 5}, 1.0}, {{10, 20, 30, 40, 50}, 1.0}, {}};
    const NormStats s{0, 10, 0, 100};
    const auto ds = extract_windows(p, s, 4, 2, 7, "cap");
    ASSERT_EQ(ds.size(), 2u);
    EXPECT_EQ(ds.positions, (std::vector<std::size_t>{3, 4}));
    const auto r0 = ds.row(0);
    EXPECT_EQ(std::vector<double>(r0.begin(), r0.end()), (std::vector<double>{0.1, 0.2, 0.3, 0.4}));
    EXPECT_DOUBLE_EQ(ds.targets[0], 0.4);
    EXPECT_DOUBLE_EQ(ds.targets[1], 0.5);
    EXPECT_EQ(ds.sources, (std::vector<std::string>{"cap"}));
}

TEST(Windows, DistinctDeterministicAndInRange)
{
    const auto x = siggen::gen_uniform_noise(50000, 0.6, 1.0, 1);
    CapturePair p{x, dutsim::simulate(dutsim::pw210_like(), x, 2), {}};
    const auto s = fit_norm_stats(std::vector<CapturePair>{p});
    const auto ds = extract_windows(p, s, 1024, 2048, 5);
    ASSERT_EQ(ds.size(), 2048u);
    EXPECT_EQ(std::set<std::size_t>(ds.positions.begin(), ds.positions.end()).size(), 2048u);
    EXPECT_TRUE(std::is_sorted(ds.positions.begin(), ds.positions.end()));
    EXPECT_GE(ds.positions.front(), 1023u);
    for (double v : ds.inputs)
        ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    for (double v : ds.targets)
        ASSERT_TRUE(v >= 0.0 && v <= 1.0);
    EXPECT_EQ(ds.positions, extract_windows(p, s, 1024, 2048, 5).positions);
    EXPECT_NE(ds.positions, extract_windows(p, s, 1024, 2048, 6).positions);
}

TEST(Windows, InputsComeOnlyFromStimulus)
{
    auto p = ramp_pair(64);
    const NormStats s{0, 100, 0, 1000};
    const auto a = extract_windows(p, s, 8, 10, 3);
    // Scribble over every response sample that is not a target.
    std::vector<bool> is_target(64, false);
    for (auto n : a.positions)
        is_target[n] = true;
    for (std::size_t i = 0; i < 64; ++i)
        if (!is_target[i])
            p.response.samples[i] = -777;
    const auto b = extract_windows(p, s, 8, 10, 3);
    EXPECT_EQ(a.inputs, b.inputs);
    EXPECT_EQ(a.targets, b.targets);
}

TEST(Windows, InsufficientLength)
{
    const auto p = ramp_pair(10);
    const NormStats s{0, 20, 0, 200};
    EXPECT_THROW(extract_windows(p, s, 11, 1, 0), Error);
    EXPECT_THROW(extract_windows(p, s, 4, 8, 0), Error);
    EXPECT_NO_THROW(extract_windows(p, s, 4, 7, 0));
}

TEST(Dataset, AppendRequiresMatchingShape)
{
    const auto p = ramp_pair(32);
    const NormStats s{0, 40, 0, 200};
    auto a = extract_windows(p, s, 4, 5, 1, "a");
    a.append(extract_windows(p, s, 4, 5, 2, "b"));
    EXPECT_EQ(a.size(), 10u);
    EXPECT_EQ(a.sources.size(), 2u);
    EXPECT_EQ(a.source[9], 1u);
    EXPECT_THROW(a.append(extract_windows(p, s, 5, 5, 2)), Error);
    EXPECT_THROW(a.append(extract_windows(p, NormStats{0, 41, 0, 200}, 4, 5, 2)), Error);
}

TEST(Dataset, BinaryRoundTrip)
{
    const auto x = siggen::gen_uniform_noise(4096, 0.6, 1.0, 1);
    CapturePair p{x, dutsim::simulate(dutsim::pw210_like(), x, 2), {}};
    const auto s = fit_norm_stats(std::vector<CapturePair>{p});
    auto ds = extract_windows(p, s, 64, 100, 5, "first");
    ds.append(extract_windows(p, s, 64, 50, 6, "second"));
    const auto path = std::filesystem::temp_directory_path() / "rfmodel_ds_roundtrip.bin";
    write_dataset(ds, path);
    const auto back = read_dataset(path);
    EXPECT_EQ(back.window, ds.window);
    EXPECT_EQ(back.stats, ds.stats);
    EXPECT_EQ(back.inputs, ds.inputs);
    EXPECT_EQ(back.targets, ds.targets);
    EXPECT_EQ(back.source, ds.source);
    EXPECT_EQ(back.sources, ds.sources);

    // Truncation is detected.
    std::filesystem::resize_file(path, std::filesystem::file_size(path) - 9);
    EXPECT_THROW(read_dataset(path), Error);
    std::filesystem::remove(path);
}
