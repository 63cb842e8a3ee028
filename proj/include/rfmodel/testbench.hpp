#pragma once

#include "rfmodel/dutsim.hpp"
#include "rfmodel/siggen.hpp"
#include "rfmodel/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

/// Simulated two-channel acquisition rig and its on-disk formats.
///
/// Capture CSV layout (ch1 = stimulus, ch2 = DUT response):
///
///     # rfmodel-capture v1
///     # sample_rate_hz=<%.17g>
///     # kind=<waveform kind>        (optional metadata lines: key=value)
///     time_s,ch1_v,ch2_v
///     <t_k>,<x_k>,<y_k>             (t_k = k / fs, all values %.17g)
///
/// Readers accept files without comment lines; the sample rate is then
/// inferred from the time column, which must be a uniform progression.
namespace rfmodel::testbench {

enum class WaveformKind { uniform_noise, band_noise, sine, dual_tone, power_sweep };

std::string_view to_string(WaveformKind kind);
WaveformKind parse_kind(std::string_view text);

struct CaptureMeta {
    WaveformKind kind = WaveformKind::uniform_noise;
    std::string group;       // training | time_test | sine_sweep | dual_tone | power_sweep_<i>
    double amplitude_v = 0;  // peak amplitude (per tone for dual_tone)
    double f1_hz = 0;        // band start, tone, or lower tone
    double f2_hz = 0;        // band end or upper tone; 0 when unused
    std::uint64_t seed = 0;  // stimulus seed; see noise_seed()
    std::size_t capture_index = 0;

    bool operator==(const CaptureMeta&) const = default;
};

struct CapturePair {
    Waveform stimulus;
    Waveform response;
    CaptureMeta meta;

    std::size_t size() const noexcept { return stimulus.size(); }
    double sample_rate_hz() const noexcept { return stimulus.sample_rate_hz; }
};

/// Throws unless both channels are valid, equally long and share fs.
void validate(const CapturePair& pair);

/// Drives the DUT with the stimulus and records both channels. `seed` feeds
/// the DUT noise; meta is stored unchanged.
CapturePair acquire(const dutsim::DutSpec& dut, const Waveform& stimulus, std::uint64_t seed,
                    CaptureMeta meta = {});

void write_capture_csv(const CapturePair& pair, std::ostream& out);
void write_capture_csv(const CapturePair& pair, const std::filesystem::path& path);
CapturePair read_capture_csv(std::istream& in, const std::string& source_name = "<stream>");
CapturePair read_capture_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset plans

struct NoisePlan {
    double amplitude_vpp = 1.2;
    std::size_t count = 300;
};

struct BandNoisePlan {
    double amplitude_vpp = 1.0;
    std::vector<siggen::BandSpec> bands;  // one capture per band
};

struct SineSweepPlan {
    double amplitude_vpp = 0.2;
    double f_lo_hz = 0;
    double f_hi_hz = 0;
    std::size_t count = 100;
};

/// Two tones spaced spacing_bins FFT bins apart, centered on each sweep point.
/// amplitude_vpp applies to each tone, so the sum peaks near vpp.
struct DualToneSweepPlan {
    double amplitude_vpp = 0.2;
    double f_lo_hz = 0;
    double f_hi_hz = 0;
    std::size_t count = 100;
    std::size_t spacing_bins = 2;
};

/// Single tone at a fixed frequency, power linearly spaced in dBm.
struct PowerSweepPlan {
    double f_hz = 0;
    double p_lo_dbm = -20;
    double p_hi_dbm = -5;
    std::size_t count = 100;
};

struct DatasetPlan {
    double sample_rate_hz = 1.0;
    std::size_t samples_per_file = 50000;
    std::size_t n_fft = 5000;  // grid that tone frequencies are snapped to
    double z_ohm = siggen::kDefaultImpedance;
    NoisePlan training;
    BandNoisePlan time_test;
    SineSweepPlan sine;
    DualToneSweepPlan dual;
    std::vector<PowerSweepPlan> power_sweeps;
};

/// count contiguous, equal-width bands covering [lo, hi].
std::vector<siggen::BandSpec> contiguous_bands(double lo_hz, double hi_hz, std::size_t count);

/// Full lab-scale plan at fs = 25 GHz with a 25,000-point FFT grid.
DatasetPlan lab_plan();

/// Desk-scale plan at fs = 1: counts 20/6/10/10/2x10, 8,192 samples/file.
DatasetPlan desk_plan();

/// Throws on empty counts, unordered/overlapping bands or out-of-band tones.
void validate(const DatasetPlan& plan);

/// Rounds f to the nearest bin of an n_fft-point grid at fs.
double snap_to_bin(double f_hz, double sample_rate_hz, std::size_t n_fft);

struct TonePair {
    double f1_hz = 0;
    double f2_hz = 0;
};

/// count points evenly spaced on [f_lo, f_hi], each snapped to the n_fft grid.
std::vector<double> sine_sweep_frequencies(double f_lo_hz, double f_hi_hz, std::size_t count, double sample_rate_hz,
                                           std::size_t n_fft);

/// Tone pairs exactly spacing_bins bins apart around evenly spaced, snapped
/// centers: f1 = c - floor(s/2) bins, f2 = f1 + s bins.
std::vector<TonePair> dual_tone_sweep(double center_lo_hz, double center_hi_hz, std::size_t count,
                                      double sample_rate_hz, std::size_t n_fft, std::size_t spacing_bins = 2);

/// One planned capture: metadata plus everything needed to synthesize it.
struct PlannedCapture {
    CaptureMeta meta;
    std::string file_name;
};

/// Expands the plan into concrete captures, in manifest order. Tone
/// frequencies are snapped to the plan's FFT grid.
std::vector<PlannedCapture> plan_captures(const DatasetPlan& plan, std::uint64_t master_seed);

/// Seed of the DUT noise for a planned capture, distinct from the stimulus seed.
std::uint64_t noise_seed(const CaptureMeta& meta);

/// Regenerates the stimulus described by the metadata.
Waveform synthesize_stimulus(const CaptureMeta& meta, std::size_t n, double sample_rate_hz);

struct ManifestEntry {
    CaptureMeta meta;
    std::filesystem::path path;  // absolute after read_manifest
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    std::vector<ManifestEntry> group(std::string_view name) const;
};

inline constexpr std::string_view kManifestName = "manifest.jsonl";

/// Writes one CSV per planned capture plus manifest.jsonl into out_dir.
Manifest build_dataset_suite(const DatasetPlan& plan, const dutsim::DutSpec& dut,
                             const std::filesystem::path& out_dir, std::uint64_t seed);

/// One JSON object per line: index, kind, group, amplitude_v, f1_hz, f2_hz,
/// seed, path (relative to the manifest's directory).
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace rfmodel::testbench
