#pragma once

#include "rfmodel/waveform.hpp"

#include <cstddef>
#include <cstdint>

/// Stimulus generators and amplitude/power conversion.
///
/// Every generator is a pure function of its arguments; noise generators draw
/// from rfmodel::Rng so a (seed, n) pair always yields the same samples.
namespace rfmodel::siggen {

struct BandSpec {
    double f_start_hz = 0.0;
    double f_end_hz = 0.0;
};

struct ToneSpec {
    double f_hz = 0.0;
    double amplitude_v = 0.0;
    double delta_f_hz = 0.0;
};

/// n i.i.d. samples uniform on [-A, A].
Waveform gen_uniform_noise(std::size_t n, double amplitude_v, double sample_rate_hz, std::uint64_t seed);

/// Band-limited noise built in the frequency domain.
///
/// Bins k = round(f * n / fs) from the start to the end frequency (inclusive)
/// get Uniform(-1, 1) real and imaginary parts, mirrored as complex conjugates
/// into the negative half; all other bins are zero. After the inverse
/// transform the signal is mapped affinely so that min = -A and max = +A.
/// DC and Nyquist bins, when inside the band, keep only their real part.
Waveform gen_narrowband_noise(std::size_t n, BandSpec band, double amplitude_v, double sample_rate_hz,
                              std::uint64_t seed);

/// samples[k] = A * sin(2 pi (f + df) k / fs)
Waveform gen_sine(std::size_t n, ToneSpec tone, double sample_rate_hz);

/// Sum of two sines of equal amplitude at f1 and f2.
Waveform gen_dual_tone(std::size_t n, double f1_hz, double f2_hz, double amplitude_v, double sample_rate_hz);

/// Reference impedance used throughout (ohms).
inline constexpr double kDefaultImpedance = 50.0;

/// Power of a sine of amplitude a_v (volts, peak) into z_ohm, in dBm:
/// 10 log10(a^2 / (2 Z 1e-3)).
double amplitude_to_dbm(double a_v, double z_ohm = kDefaultImpedance);
double dbm_to_amplitude(double p_dbm, double z_ohm = kDefaultImpedance);

}  // namespace rfmodel::siggen
