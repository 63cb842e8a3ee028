#include "rfmodel/dutsim.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/rng.hpp"
#include "rfmodel/siggen.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace rfmodel::dutsim {

void validate(const DutSpec& dut)
{
    if (dut.a1 == 0.0 || !std::isfinite(dut.a1))
        fail("dut: a1 must be finite and non-zero");
    if (!std::isfinite(dut.a3))
        fail("dut: a3 must be finite");
    if (dut.pre_filter.empty() ||
        std::none_of(dut.pre_filter.begin(), dut.pre_filter.end(), [](double c) { return c != 0.0; }))
        fail("dut: pre_filter needs at least one non-zero coefficient");
    if (!(dut.noise_sigma_v >= 0.0))
        fail("dut: noise_sigma_v must be >= 0");
}

DutSpec pw210_like()
{
    DutSpec dut;
    dut.a1 = 10.0;
    // |a3| = 4 a1^3 / (3 A_out^2) with A_out^2 = 2 Z 1e-3 10^(30/10) = 100 V^2.
    dut.a3 = -40.0 / 3.0;
    constexpr double rho = 0.2;
    dut.pre_filter.resize(8);
    double p = 1.0;
    for (auto& c : dut.pre_filter) {
        c = p;
        p *= rho;
    }
    const double dc = std::accumulate(dut.pre_filter.begin(), dut.pre_filter.end(), 0.0);
    for (auto& c : dut.pre_filter)
        c /= dc;
    dut.delay_samples = 23;
    dut.noise_sigma_v = 1e-3;
    return dut;
}

Waveform simulate(const DutSpec& dut, const Waveform& stimulus, std::uint64_t seed)
{
    validate(dut);
    if (stimulus.empty())
        fail("simulate: stimulus is empty");

    const std::size_t n = stimulus.size();
    const auto& x = stimulus.samples;
    const auto& h = dut.pre_filter;
    const double sign = dut.inverting ? -1.0 : 1.0;

    std::vector<double> shaped(n);
    for (std::size_t k = 0; k < n; ++k) {
        double u = 0.0;
        const std::size_t taps = std::min(h.size(), k + 1);
        for (std::size_t j = 0; j < taps; ++j)
            u += h[j] * x[k - j];
        shaped[k] = sign * (dut.a1 * u + dut.a3 * u * u * u);
    }

    Waveform y;
    y.sample_rate_hz = stimulus.sample_rate_hz;
    y.samples.assign(n, 0.0);
    for (std::size_t k = dut.delay_samples; k < n; ++k)
        y.samples[k] = shaped[k - dut.delay_samples];

    if (dut.noise_sigma_v > 0.0) {
        Rng rng(seed);
        for (auto& s : y.samples)
            s += dut.noise_sigma_v * rng.normal();
    }
    return y;
}

double filter_magnitude(const DutSpec& dut, double f_hz, double sample_rate_hz)
{
    const double omega = 2.0 * std::numbers::pi * f_hz / sample_rate_hz;
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t k = 0; k < dut.pre_filter.size(); ++k)
        acc += dut.pre_filter[k] * std::polar(1.0, -omega * static_cast<double>(k));
    return std::abs(acc);
}

double analytic_small_signal_gain_db(const DutSpec& dut, double f_hz, double sample_rate_hz)
{
    if (!(f_hz < sample_rate_hz / 2.0))
        fail("analytic gain: frequency must be below Nyquist");
    return 20.0 * std::log10(std::abs(dut.a1) * filter_magnitude(dut, f_hz, sample_rate_hz));
}

double analytic_tone_gain_db(const DutSpec& dut, double f_hz, double amplitude_v, double sample_rate_hz)
{
    if (!(f_hz < sample_rate_hz / 2.0))
        fail("analytic gain: frequency must be below Nyquist");
    if (!(amplitude_v > 0))
        fail("analytic gain: amplitude must be positive");
    const double h = filter_magnitude(dut, f_hz, sample_rate_hz);
    // Fundamental of a1 u + a3 u^3 for u = hA cos(wt): a1 hA + (3/4) a3 (hA)^3.
    const double fundamental = dut.a1 * h + 0.75 * dut.a3 * h * h * h * amplitude_v * amplitude_v;
    return 20.0 * std::log10(std::abs(fundamental));
}

std::optional<double> analytic_oip3_dbm(const DutSpec& dut, double /*f_hz*/, double z_ohm)
{
    if (dut.a3 == 0.0)
        return std::nullopt;
    const double a1 = std::abs(dut.a1);
    const double a_out = a1 * std::sqrt(4.0 * a1 / (3.0 * std::abs(dut.a3)));
    return siggen::amplitude_to_dbm(a_out, z_ohm);
}

}  // namespace rfmodel::dutsim
