#include "rfmodel/siggen.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/fft.hpp"
#include "rfmodel/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace rfmodel::siggen {

namespace {

void check_rate(double fs)
{
    if (!(fs > 0.0) || !std::isfinite(fs))
        fail("sample rate must be positive");
}

void check_amplitude(double a)
{
    if (!(a >= 0.0) || !std::isfinite(a))
        fail("amplitude must be finite and non-negative");
}

}  // namespace

Waveform gen_uniform_noise(std::size_t n, double amplitude_v, double sample_rate_hz, std::uint64_t seed)
{
    if (n == 0)
        fail("empty request: uniform noise needs at least one sample");
    check_rate(sample_rate_hz);
    check_amplitude(amplitude_v);

    Rng rng(seed);
    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n);
    for (auto& s : w.samples)
        s = rng.uniform(-amplitude_v, amplitude_v);
    return w;
}

Waveform gen_narrowband_noise(std::size_t n, BandSpec band, double amplitude_v, double sample_rate_hz,
                              std::uint64_t seed)
{
    if (n < 2)
        fail("narrowband noise needs at least two samples");
    check_rate(sample_rate_hz);
    check_amplitude(amplitude_v);
    const double nyquist = sample_rate_hz / 2.0;
    if (!(band.f_start_hz >= 0.0) || !(band.f_end_hz > band.f_start_hz))
        fail("band must satisfy 0 <= f_start < f_end");
    if (band.f_end_hz > nyquist)
        fail("spectral bounds: band end " + std::to_string(band.f_end_hz) + " Hz exceeds Nyquist " +
             std::to_string(nyquist) + " Hz");

    const double bins_per_hz = static_cast<double>(n) / sample_rate_hz;
    const auto k_start = static_cast<std::size_t>(std::llround(band.f_start_hz * bins_per_hz));
    const auto k_end = static_cast<std::size_t>(std::llround(band.f_end_hz * bins_per_hz));

    Rng rng(seed);
    std::vector<fft::Complex> spectrum(n, fft::Complex(0.0, 0.0));
    for (std::size_t k = k_start; k <= k_end; ++k) {
        const double re = rng.uniform(-1.0, 1.0);
        const double im = rng.uniform(-1.0, 1.0);
        const bool self_conjugate = (k == 0) || (2 * k == n);
        if (self_conjugate) {
            spectrum[k] = fft::Complex(re, 0.0);
        } else {
            spectrum[k] = fft::Complex(re, im);
            spectrum[n - k] = fft::Complex(re, -im);
        }
    }

    const auto time = fft::inverse(spectrum);
    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = time[i].real();

    const auto [lo_it, hi_it] = std::minmax_element(w.samples.begin(), w.samples.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    if (!(hi > lo))
        fail("narrowband noise is constant; widen the band");
    // Affine map onto [-A, A]; the extremes are pinned exactly.
    const auto lo_idx = lo_it - w.samples.begin();
    const auto hi_idx = hi_it - w.samples.begin();
    for (auto& s : w.samples)
        s = amplitude_v * (2.0 * (s - lo) / (hi - lo) - 1.0);
    w.samples[static_cast<std::size_t>(lo_idx)] = -amplitude_v;
    w.samples[static_cast<std::size_t>(hi_idx)] = amplitude_v;
    return w;
}

Waveform gen_sine(std::size_t n, ToneSpec tone, double sample_rate_hz)
{
    if (n == 0)
        fail("empty request: a sine needs at least one sample");
    check_rate(sample_rate_hz);
    check_amplitude(tone.amplitude_v);
    const double f = tone.f_hz + tone.delta_f_hz;
    if (!(f > 0.0))
        fail("tone frequency must be positive");
    if (f >= sample_rate_hz / 2.0)
        fail("aliasing: tone at " + std::to_string(f) + " Hz is at or above Nyquist");

    Waveform w;
    w.sample_rate_hz = sample_rate_hz;
    w.samples.resize(n);
    // Phase is reduced modulo one cycle in exact integer-ish arithmetic so
    // long captures do not lose precision.
    const double cycles_per_sample = f / sample_rate_hz;
    for (std::size_t k = 0; k < n; ++k) {
        double phase = cycles_per_sample * static_cast<double>(k);
        phase -= std::floor(phase);
        w.samples[k] = tone.amplitude_v * std::sin(2.0 * std::numbers::pi * phase);
    }
    return w;
}

Waveform gen_dual_tone(std::size_t n, double f1_hz, double f2_hz, double amplitude_v, double sample_rate_hz)
{
    if (f1_hz == f2_hz)
        fail("degenerate tone pair: f1 == f2");
    auto w = gen_sine(n, {f1_hz, amplitude_v, 0.0}, sample_rate_hz);
    const auto w2 = gen_sine(n, {f2_hz, amplitude_v, 0.0}, sample_rate_hz);
    for (std::size_t k = 0; k < n; ++k)
        w.samples[k] += w2.samples[k];
    return w;
}

double amplitude_to_dbm(double a_v, double z_ohm)
{
    if (!(z_ohm > 0.0))
        fail("impedance must be positive");
    if (!(a_v > 0.0))
        fail("domain error: amplitude must be positive to express in dBm");
    return 10.0 * std::log10(a_v * a_v / (2.0 * z_ohm * 1e-3));
}

double dbm_to_amplitude(double p_dbm, double z_ohm)
{
    if (!(z_ohm > 0.0))
        fail("impedance must be positive");
    return std::sqrt(2.0 * z_ohm * 1e-3 * std::pow(10.0, p_dbm / 10.0));
}

}  // namespace rfmodel::siggen
