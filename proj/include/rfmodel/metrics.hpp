#pragma once

#include "rfmodel/dutsim.hpp"
#include "rfmodel/fft.hpp"
#include "rfmodel/siggen.hpp"
#include "rfmodel/testbench.hpp"
#include "rfmodel/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rfmodel::nn {
class Predictor;
}

/// Frequency-domain metrology shared by measured and predicted responses.
///
/// No window function is applied: tones are expected to sit exactly on FFT
/// bins (coherent sampling), which makes single-sided amplitudes 2|X[k]|/N
/// exact. Off-grid requests raise a metrology error instead of returning a
/// leakage-corrupted reading.
namespace rfmodel::metrics {

struct Spectrum {
    std::vector<double> bin_freqs_hz;
    std::vector<fft::Complex> bins;
    std::size_t n_fft = 0;
    double sample_rate_hz = 1.0;

    double resolution_hz() const { return sample_rate_hz / static_cast<double>(n_fft); }
    /// Single-sided amplitude 2|X[k]|/N (|X[k]|/N at DC and Nyquist).
    double amplitude(std::size_t k) const;
};

/// DFT of the first n_fft samples.
Spectrum spectrum(const Waveform& w, std::size_t n_fft);

struct ToneReading {
    double f_hz = 0;
    double amplitude_v = 0;
    std::size_t bin = 0;
};

/// Largest bin in (0, N/2), DC and Nyquist excluded; ties go to the lower
/// frequency.
ToneReading peak_tone(const Spectrum& s);

/// Bin index of a coherent frequency; throws a metrology error if f is more
/// than 1e-6 bin away from the grid or outside (0, fs/2).
std::size_t coherent_bin(const Spectrum& s, double f_hz);

double tone_amplitude(const Spectrum& s, double f_hz);
double tone_power_dbm(const Spectrum& s, double f_hz, double z_ohm = siggen::kDefaultImpedance);

struct GainReading {
    double f_hz = 0;
    double p_in_dbm = 0;
    double p_out_dbm = 0;
    double gain_db = 0;
};

/// Gain at the dominant input tone: P_out(f_max) - P_in(f_max).
GainReading gain_db(const Waveform& input, const Waveform& output, std::size_t n_fft,
                    double z_ohm = siggen::kDefaultImpedance);

struct Oip3Reading {
    double p_out1_dbm = 0;   // fundamental at f1
    double p_out3_dbm = 0;   // IM3 at 2 f1 - f2
    double upper_im3_dbm = 0;  // 2 f2 - f1, informational
    double oip3_dbm = 0;
};

/// IM3 readings need to clear the median single-sided bin amplitude of the
/// same spectrum by this factor (20 dB).
inline constexpr double kIm3FloorRatio = 10.0;

/// OIP3 = (3 P_out,1 - P_out,3) / 2 from a two-tone response, with P_out,1 at
/// f1 and P_out,3 at 2 f1 - f2. Throws a metrology error when the IM3 bin
/// does not clear the noise floor.
Oip3Reading oip3_dbm(const Waveform& input, const Waveform& output, double f1_hz, double f2_hz, std::size_t n_fft,
                     double z_ohm = siggen::kDefaultImpedance);

/// The intercept formula on its own.
double oip3_from_powers(double p_out1_dbm, double p_out3_dbm);

/// fs / n
double freq_resolution(double sample_rate_hz, std::size_t n);

// ---------------------------------------------------------------------------
// Curves

enum class CurveKind { gain_vs_freq, gain_vs_power, oip3_vs_freq };

std::string to_string(CurveKind kind);

struct CurvePoint {
    double x = 0;
    double measured = 0;
    double predicted = 0;
    bool measured_ok = true;   // false when the reading was unreliable (value is NaN)
    bool predicted_ok = true;
};

struct MetricCurve {
    CurveKind kind = CurveKind::gain_vs_freq;
    std::vector<CurvePoint> points;

    std::size_t unreliable_count() const;
};

/// "x,measured,predicted" with %.17g values; unreliable readings are "nan".
void write_curve_csv(const MetricCurve& curve, const std::filesystem::path& path);
MetricCurve read_curve_csv(const std::filesystem::path& path, CurveKind kind);

/// Anything that maps a stimulus to a response segment [start, start + n).
class ResponseSource {
public:
    virtual ~ResponseSource() = default;
    virtual Waveform respond(const Waveform& stimulus, std::size_t start, std::size_t n) = 0;
};

/// The synthetic DUT itself, simulated with a fixed noise seed.
class DutResponse final : public ResponseSource {
public:
    DutResponse(dutsim::DutSpec dut, std::uint64_t seed) : dut_(std::move(dut)), seed_(seed) {}
    Waveform respond(const Waveform& stimulus, std::size_t start, std::size_t n) override;

private:
    dutsim::DutSpec dut_;
    std::uint64_t seed_;
};

/// A trained network, sliding its window over the measured stimulus.
class ModelResponse final : public ResponseSource {
public:
    explicit ModelResponse(nn::Predictor& predictor) : predictor_(predictor) {}
    Waveform respond(const Waveform& stimulus, std::size_t start, std::size_t n) override;

private:
    nn::Predictor& predictor_;
};

/// Where in each capture the metrology looks.
struct AnalysisWindow {
    std::size_t start = 1024;  // at least the model's window - 1
    std::size_t n_fft = 5000;
    double z_ohm = siggen::kDefaultImpedance;
};

/// Curves from measured captures: each capture's response is analysed over
/// [start, start + n_fft), and the model predicts the same span from the
/// capture's stimulus. Points are sorted by x.
MetricCurve gain_frequency_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                                 const AnalysisWindow& win);
MetricCurve gain_power_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                             const AnalysisWindow& win);
MetricCurve oip3_frequency_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                                 const AnalysisWindow& win);

/// Sweep definitions used when the metrology drives the DUT directly.
struct SweepSettings {
    double sample_rate_hz = 1.0;
    AnalysisWindow window;
    std::uint64_t seed = 0;
};

/// Acquires one sine capture per frequency from the DUT and builds the curve.
MetricCurve gain_frequency_curve(ResponseSource& model, const dutsim::DutSpec& dut, std::span<const double> freqs_hz,
                                 double amplitude_v, const SweepSettings& settings);
/// Single tone at f_hz, one capture per input power (dBm).
MetricCurve gain_power_curve(ResponseSource& model, const dutsim::DutSpec& dut, double f_hz,
                             std::span<const double> powers_dbm, const SweepSettings& settings);

using testbench::TonePair;

/// Two tones of amplitude_per_tone each per sweep point.
MetricCurve oip3_frequency_curve(ResponseSource& model, const dutsim::DutSpec& dut, std::span<const TonePair> pairs,
                                 double amplitude_per_tone, const SweepSettings& settings);

}  // namespace rfmodel::metrics
