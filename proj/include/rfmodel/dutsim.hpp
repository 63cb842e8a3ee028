#pragma once

#include "rfmodel/waveform.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

/// Synthetic amplifier: FIR pre-filter followed by a static odd cubic,
/// an integer delay and additive white Gaussian noise (a Wiener model).
namespace rfmodel::dutsim {

struct DutSpec {
    double a1 = 10.0;
    double a3 = 0.0;
    std::vector<double> pre_filter{1.0};
    std::size_t delay_samples = 0;
    double noise_sigma_v = 0.0;
    bool inverting = false;

    bool operator==(const DutSpec&) const = default;
};

/// Throws if a1 == 0 or the filter is empty/all-zero or sigma < 0.
void validate(const DutSpec& dut);

/// A1 = 10, OIP3 of 30 dBm into 50 ohm, 8-tap exponential rolloff
/// (about -3.3 dB at 0.4 fs), 23 samples of delay, 1 mV noise.
DutSpec pw210_like();

/// y[k] = s * (a1 u + a3 u^3) delayed by d, plus N(0, sigma^2), with
/// u = pre_filter * stimulus (causal, zero initial state) and s = -1 when
/// inverting. Output has the stimulus' length and sample rate.
Waveform simulate(const DutSpec& dut, const Waveform& stimulus, std::uint64_t seed);

/// |H(e^{j 2 pi f / fs})| of the pre-filter.
double filter_magnitude(const DutSpec& dut, double f_hz, double sample_rate_hz);

/// 20 log10(|a1| |H(f)|).
double analytic_small_signal_gain_db(const DutSpec& dut, double f_hz, double sample_rate_hz);

/// Large-signal gain of a single tone of amplitude A, including the cubic's
/// compression (or expansion) of the fundamental.
double analytic_tone_gain_db(const DutSpec& dut, double f_hz, double amplitude_v, double sample_rate_hz);

/// Output-referred third-order intercept in dBm, or std::nullopt when a3 == 0
/// (no third-order product, the intercept is at infinity).
///
/// For closely spaced tones of amplitude A each, the filter scales both to
/// |H|A, the fundamental leaves at |a1||H|A and the lower IM3 product at
/// (3/4)|a3||H|^3 A^3. Equating the two and solving for the fundamental gives
/// A_out = |a1| sqrt(4 |a1| / (3 |a3|)); the filter magnitude cancels, which
/// is why f_hz does not enter the result.
std::optional<double> analytic_oip3_dbm(const DutSpec& dut, double f_hz, double z_ohm);

}  // namespace rfmodel::dutsim
