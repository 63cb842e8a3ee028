#include "rfmodel/metrics.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace rfmodel::metrics {

namespace {

[[noreturn]] void metrology_error(const std::string& msg) { throw Error(ErrorCode::metrology, msg); }

}  // namespace

double Spectrum::amplitude(std::size_t k) const
{
    const double mag = std::abs(bins.at(k)) / static_cast<double>(n_fft);
    const bool edge = (k == 0) || (2 * k == n_fft);
    return edge ? mag : 2.0 * mag;
}

Spectrum spectrum(const Waveform& w, std::size_t n_fft)
{
    if (n_fft == 0)
        fail("spectrum: n_fft must be positive");
    if (n_fft > w.size())
        fail("spectrum: n_fft " + std::to_string(n_fft) + " exceeds waveform length " + std::to_string(w.size()));
    Spectrum s;
    s.n_fft = n_fft;
    s.sample_rate_hz = w.sample_rate_hz;
    s.bins = fft::forward(std::span<const double>(w.samples.data(), n_fft));
    s.bin_freqs_hz.resize(n_fft);
    for (std::size_t k = 0; k < n_fft; ++k)
        s.bin_freqs_hz[k] = static_cast<double>(k) * s.resolution_hz();
    return s;
}

ToneReading peak_tone(const Spectrum& s)
{
    ToneReading best;
    double best_mag = 0.0;
    for (std::size_t k = 1; 2 * k < s.n_fft; ++k) {
        const double mag = std::abs(s.bins[k]);
        if (mag > best_mag) {
            best_mag = mag;
            best.bin = k;
        }
    }
    if (best.bin == 0)
        metrology_error("peak_tone: spectrum has no energy outside DC/Nyquist");
    best.f_hz = static_cast<double>(best.bin) * s.resolution_hz();
    best.amplitude_v = s.amplitude(best.bin);
    return best;
}

std::size_t coherent_bin(const Spectrum& s, double f_hz)
{
    const double exact = f_hz / s.resolution_hz();
    const double k = std::round(exact);
    if (std::abs(exact - k) > 1e-6)
        metrology_error("incoherent tone: " + std::to_string(f_hz) + " Hz is " + std::to_string(exact) +
                        " bins, not on the FFT grid");
    if (k <= 0 || 2 * k >= static_cast<double>(s.n_fft))
        metrology_error("tone at " + std::to_string(f_hz) + " Hz lies outside (0, Nyquist)");
    return static_cast<std::size_t>(k);
}

double tone_amplitude(const Spectrum& s, double f_hz) { return s.amplitude(coherent_bin(s, f_hz)); }

double tone_power_dbm(const Spectrum& s, double f_hz, double z_ohm)
{
    const double a = tone_amplitude(s, f_hz);
    if (!(a > 0))
        metrology_error("tone at " + std::to_string(f_hz) + " Hz has zero amplitude");
    return siggen::amplitude_to_dbm(a, z_ohm);
}

GainReading gain_db(const Waveform& input, const Waveform& output, std::size_t n_fft, double z_ohm)
{
    if (input.sample_rate_hz != output.sample_rate_hz)
        fail("gain_db: input and output sample rates differ");
    const auto s_in = spectrum(input, n_fft);
    const auto s_out = spectrum(output, n_fft);
    GainReading r;
    r.f_hz = peak_tone(s_in).f_hz;
    r.p_in_dbm = tone_power_dbm(s_in, r.f_hz, z_ohm);
    r.p_out_dbm = tone_power_dbm(s_out, r.f_hz, z_ohm);
    r.gain_db = r.p_out_dbm - r.p_in_dbm;
    return r;
}

double oip3_from_powers(double p_out1_dbm, double p_out3_dbm) { return (3.0 * p_out1_dbm - p_out3_dbm) / 2.0; }

Oip3Reading oip3_dbm(const Waveform& input, const Waveform& output, double f1_hz, double f2_hz, std::size_t n_fft,
                     double z_ohm)
{
    if (input.sample_rate_hz != output.sample_rate_hz)
        fail("oip3: input and output sample rates differ");
    if (f1_hz == f2_hz)
        fail("oip3: tones must differ");
    const auto s_out = spectrum(output, n_fft);
    const std::size_t k1 = coherent_bin(s_out, f1_hz);
    const std::size_t k2 = coherent_bin(s_out, f2_hz);
    // Both tones must be resolvable: at least two bins apart.
    if ((k1 > k2 ? k1 - k2 : k2 - k1) < 2)
        metrology_error("oip3: tones closer than two bins at resolution " + std::to_string(s_out.resolution_hz()) +
                        " Hz");
    const std::size_t k3 = coherent_bin(s_out, 2 * f1_hz - f2_hz);
    const std::size_t k3u = coherent_bin(s_out, 2 * f2_hz - f1_hz);

    std::vector<double> amps;
    amps.reserve(s_out.n_fft / 2);
    for (std::size_t k = 1; 2 * k < s_out.n_fft; ++k)
        amps.push_back(s_out.amplitude(k));
    std::nth_element(amps.begin(), amps.begin() + std::ptrdiff_t(amps.size() / 2), amps.end());
    const double floor = amps[amps.size() / 2];

    const double a1 = s_out.amplitude(k1);
    const double a3 = s_out.amplitude(k3);
    if (!(a1 > 0) || !(a3 > kIm3FloorRatio * floor))
        metrology_error("oip3: IM3 product at " + std::to_string(2 * f1_hz - f2_hz) +
                        " Hz is below the noise floor (amplitude " + std::to_string(a3) + " V, floor " +
                        std::to_string(floor) + " V)");
    Oip3Reading r;
    r.p_out1_dbm = siggen::amplitude_to_dbm(a1, z_ohm);
    r.p_out3_dbm = siggen::amplitude_to_dbm(a3, z_ohm);
    const double a3u = s_out.amplitude(k3u);
    r.upper_im3_dbm = a3u > 0 ? siggen::amplitude_to_dbm(a3u, z_ohm) : -std::numeric_limits<double>::infinity();
    r.oip3_dbm = oip3_from_powers(r.p_out1_dbm, r.p_out3_dbm);
    (void)input;
    return r;
}

double freq_resolution(double sample_rate_hz, std::size_t n)
{
    if (n == 0)
        fail("freq_resolution: n must be >= 1");
    return sample_rate_hz / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Curves

std::string to_string(CurveKind kind)
{
    switch (kind) {
    case CurveKind::gain_vs_freq: return "gain_vs_freq";
    case CurveKind::gain_vs_power: return "gain_vs_power";
    case CurveKind::oip3_vs_freq: return "oip3_vs_freq";
    }
    return "unknown";
}

std::size_t MetricCurve::unreliable_count() const
{
    return static_cast<std::size_t>(
        std::count_if(points.begin(), points.end(), [](const CurvePoint& p) { return !p.measured_ok || !p.predicted_ok; }));
}

void write_curve_csv(const MetricCurve& curve, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out << "x,measured,predicted\n";
    char buf[96];
    for (const auto& p : curve.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.x, p.measured, p.predicted);
        out << buf;
    }
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

MetricCurve read_curve_csv(const std::filesystem::path& path, CurveKind kind)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
    MetricCurve c;
    c.kind = kind;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1) {
            if (line != "x,measured,predicted")
                throw ParseError(path.string(), line_no, "expected header 'x,measured,predicted'");
            continue;
        }
        if (line.empty())
            continue;
        CurvePoint p;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &p.x, &p.measured, &p.predicted) != 3)
            throw ParseError(path.string(), line_no, "expected three numeric columns");
        p.measured_ok = std::isfinite(p.measured);
        p.predicted_ok = std::isfinite(p.predicted);
        c.points.push_back(p);
    }
    return c;
}

Waveform DutResponse::respond(const Waveform& stimulus, std::size_t start, std::size_t n)
{
    return dutsim::simulate(dut_, stimulus, seed_).segment(start, n);
}

Waveform ModelResponse::respond(const Waveform& stimulus, std::size_t start, std::size_t n)
{
    return predictor_.predict_sequence(stimulus, n, start);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Segments {
    Waveform input;
    Waveform measured;
    Waveform predicted;
};

Segments analyse_segments(ResponseSource& model, const testbench::CapturePair& cap, const AnalysisWindow& win)
{
    testbench::validate(cap);
    if (win.start + win.n_fft > cap.size())
        fail("metrics: capture " + std::to_string(cap.meta.capture_index) + " has " + std::to_string(cap.size()) +
             " samples, analysis needs " + std::to_string(win.start + win.n_fft));
    Segments s;
    s.input = cap.stimulus.segment(win.start, win.n_fft);
    s.measured = cap.response.segment(win.start, win.n_fft);
    s.predicted = model.respond(cap.stimulus, win.start, win.n_fft);
    return s;
}

void sort_and_check(MetricCurve& c)
{
    std::stable_sort(c.points.begin(), c.points.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        if (!(c.points[i].x > c.points[i - 1].x))
            fail("metrics: curve x values are not strictly increasing (duplicate sweep point)");
    }
}

}  // namespace

MetricCurve gain_frequency_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                                 const AnalysisWindow& win)
{
    MetricCurve c;
    c.kind = CurveKind::gain_vs_freq;
    for (const auto& cap : captures) {
        const auto seg = analyse_segments(model, cap, win);
        const auto measured = gain_db(seg.input, seg.measured, win.n_fft, win.z_ohm);
        const auto predicted = gain_db(seg.input, seg.predicted, win.n_fft, win.z_ohm);
        c.points.push_back({measured.f_hz, measured.gain_db, predicted.gain_db});
    }
    sort_and_check(c);
    return c;
}

MetricCurve gain_power_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                             const AnalysisWindow& win)
{
    MetricCurve c;
    c.kind = CurveKind::gain_vs_power;
    for (const auto& cap : captures) {
        const auto seg = analyse_segments(model, cap, win);
        const auto measured = gain_db(seg.input, seg.measured, win.n_fft, win.z_ohm);
        const auto predicted = gain_db(seg.input, seg.predicted, win.n_fft, win.z_ohm);
        c.points.push_back({measured.p_in_dbm, measured.gain_db, predicted.gain_db});
    }
    sort_and_check(c);
    return c;
}

MetricCurve oip3_frequency_curve(ResponseSource& model, std::span<const testbench::CapturePair> captures,
                                 const AnalysisWindow& win)
{
    MetricCurve c;
    c.kind = CurveKind::oip3_vs_freq;
    for (const auto& cap : captures) {
        const auto seg = analyse_segments(model, cap, win);
        CurvePoint p;
        p.x = 0.5 * (cap.meta.f1_hz + cap.meta.f2_hz);
        auto read = [&](const Waveform& out, double& value, bool& ok) {
            try {
                value = oip3_dbm(seg.input, out, cap.meta.f1_hz, cap.meta.f2_hz, win.n_fft, win.z_ohm).oip3_dbm;
                ok = true;
            } catch (const Error& e) {
                if (e.code() != ErrorCode::metrology)
                    throw;
                value = kNaN;
                ok = false;
            }
        };
        read(seg.measured, p.measured, p.measured_ok);
        read(seg.predicted, p.predicted, p.predicted_ok);
        c.points.push_back(p);
    }
    sort_and_check(c);
    return c;
}

namespace {

std::size_t capture_length(const SweepSettings& s) { return s.window.start + s.window.n_fft; }

testbench::CapturePair sweep_capture(const dutsim::DutSpec& dut, Waveform stimulus, testbench::CaptureMeta meta,
                                     const SweepSettings& s)
{
    meta.seed = s.seed;
    return testbench::acquire(dut, stimulus, s.seed, meta);
}

}  // namespace

MetricCurve gain_frequency_curve(ResponseSource& model, const dutsim::DutSpec& dut, std::span<const double> freqs_hz,
                                 double amplitude_v, const SweepSettings& settings)
{
    std::vector<testbench::CapturePair> caps;
    for (std::size_t i = 0; i < freqs_hz.size(); ++i) {
        testbench::CaptureMeta meta{testbench::WaveformKind::sine, "sine_sweep", amplitude_v, freqs_hz[i], 0, 0, i};
        caps.push_back(sweep_capture(
            dut, siggen::gen_sine(capture_length(settings), {freqs_hz[i], amplitude_v, 0}, settings.sample_rate_hz),
            meta, settings));
    }
    return gain_frequency_curve(model, caps, settings.window);
}

MetricCurve gain_power_curve(ResponseSource& model, const dutsim::DutSpec& dut, double f_hz,
                             std::span<const double> powers_dbm, const SweepSettings& settings)
{
    std::vector<testbench::CapturePair> caps;
    for (std::size_t i = 0; i < powers_dbm.size(); ++i) {
        const double a = siggen::dbm_to_amplitude(powers_dbm[i], settings.window.z_ohm);
        testbench::CaptureMeta meta{testbench::WaveformKind::power_sweep, "power_sweep", a, f_hz, 0, 0, i};
        caps.push_back(
            sweep_capture(dut, siggen::gen_sine(capture_length(settings), {f_hz, a, 0}, settings.sample_rate_hz), meta,
                          settings));
    }
    return gain_power_curve(model, caps, settings.window);
}

MetricCurve oip3_frequency_curve(ResponseSource& model, const dutsim::DutSpec& dut, std::span<const TonePair> pairs,
                                 double amplitude_per_tone, const SweepSettings& settings)
{
    std::vector<testbench::CapturePair> caps;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        testbench::CaptureMeta meta{testbench::WaveformKind::dual_tone, "dual_tone", amplitude_per_tone,
                                    pairs[i].f1_hz, pairs[i].f2_hz, 0, i};
        caps.push_back(sweep_capture(dut,
                                     siggen::gen_dual_tone(capture_length(settings), pairs[i].f1_hz, pairs[i].f2_hz,
                                                           amplitude_per_tone, settings.sample_rate_hz),
                                     meta, settings));
    }
    return oip3_frequency_curve(model, caps, settings.window);
}

}  // namespace rfmodel::metrics
