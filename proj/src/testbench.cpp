#include "rfmodel/testbench.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rfmodel::testbench {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kCsvHeader = "time_s,ch1_v,ch2_v";
constexpr std::string_view kCsvMagic = "rfmodel-capture v1";

void append_number(std::string& line, double v)
{
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
    line.append(buf, static_cast<std::size_t>(len));
}

std::string format_number(double v)
{
    std::string s;
    append_number(s, v);
    return s;
}

bool parse_double(std::string_view text, double& out)
{
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t'))
        text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (text.empty())
        return false;
    if (text.front() == '+')
        text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size() && std::isfinite(out);
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string_view to_string(WaveformKind kind)
{
    switch (kind) {
    case WaveformKind::uniform_noise: return "uniform_noise";
    case WaveformKind::band_noise: return "band_noise";
    case WaveformKind::sine: return "sine";
    case WaveformKind::dual_tone: return "dual_tone";
    case WaveformKind::power_sweep: return "power_sweep";
    }
    return "unknown";
}

WaveformKind parse_kind(std::string_view text)
{
    for (auto k : {WaveformKind::uniform_noise, WaveformKind::band_noise, WaveformKind::sine,
                   WaveformKind::dual_tone, WaveformKind::power_sweep}) {
        if (to_string(k) == text)
            return k;
    }
    throw Error(ErrorCode::parse, "unknown waveform kind '" + std::string(text) + "'");
}

void validate(const CapturePair& pair)
{
    rfmodel::validate(pair.stimulus);
    rfmodel::validate(pair.response);
    if (pair.stimulus.size() != pair.response.size())
        fail("capture channels differ in length");
    if (pair.stimulus.sample_rate_hz != pair.response.sample_rate_hz)
        fail("capture channels differ in sample rate");
}

CapturePair acquire(const dutsim::DutSpec& dut, const Waveform& stimulus, std::uint64_t seed, CaptureMeta meta)
{
    rfmodel::validate(stimulus);
    CapturePair pair;
    pair.response = dutsim::simulate(dut, stimulus, seed);
    pair.stimulus = stimulus;
    pair.meta = std::move(meta);
    return pair;
}

// ---------------------------------------------------------------------------
// CSV

void write_capture_csv(const CapturePair& pair, std::ostream& out)
{
    validate(pair);
    const double rate = pair.sample_rate_hz();
    const auto& m = pair.meta;
    std::string text;
    text.reserve(64 * pair.size() + 256);
    text += "# ";
    text += kCsvMagic;
    text += "\n# sample_rate_hz=" + format_number(rate);
    text += "\n# kind=" + std::string(to_string(m.kind));
    text += "\n# group=" + m.group;
    text += "\n# amplitude_v=" + format_number(m.amplitude_v);
    text += "\n# f1_hz=" + format_number(m.f1_hz);
    text += "\n# f2_hz=" + format_number(m.f2_hz);
    text += "\n# seed=" + std::to_string(m.seed);
    text += "\n# capture_index=" + std::to_string(m.capture_index);
    text += "\n";
    text += kCsvHeader;
    text += "\n";
    for (std::size_t k = 0; k < pair.size(); ++k) {
        append_number(text, static_cast<double>(k) / rate);
        text += ',';
        append_number(text, pair.stimulus.samples[k]);
        text += ',';
        append_number(text, pair.response.samples[k]);
        text += '\n';
    }
    out << text;
}

void write_capture_csv(const CapturePair& pair, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    write_capture_csv(pair, out);
    out.flush();
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

CapturePair read_capture_csv(std::istream& in, const std::string& source_name)
{
    CapturePair pair;
    std::vector<double> times;
    std::vector<std::size_t> row_lines;
    double header_rate = 0.0;
    bool seen_header = false;
    std::string line;
    std::size_t line_no = 0;

    auto meta_error = [&](const std::string& msg) -> ParseError { return ParseError(source_name, line_no, msg); };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (!seen_header) {
            if (line.empty())
                continue;
            if (line.front() == '#') {
                const std::string body = trim(std::string_view(line).substr(1));
                const auto eq = body.find('=');
                if (eq == std::string::npos)
                    continue;  // free-form comment, e.g. the magic line
                const std::string key = trim(std::string_view(body).substr(0, eq));
                const std::string value = trim(std::string_view(body).substr(eq + 1));
                double num = 0;
                auto need_number = [&]() {
                    if (!parse_double(value, num))
                        throw meta_error("metadata '" + key + "' is not a number: '" + value + "'");
                    return num;
                };
                auto need_integer = [&]() {
                    std::uint64_t v = 0;
                    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
                    if (ec != std::errc() || p != value.data() + value.size())
                        throw meta_error("metadata '" + key + "' is not an integer: '" + value + "'");
                    return v;
                };
                if (key == "sample_rate_hz") {
                    header_rate = need_number();
                    if (!(header_rate > 0))
                        throw meta_error("sample_rate_hz must be positive");
                } else if (key == "kind") {
                    try {
                        pair.meta.kind = parse_kind(value);
                    } catch (const Error& e) {
                        throw meta_error(e.what());
                    }
                } else if (key == "group") {
                    pair.meta.group = value;
                } else if (key == "amplitude_v") {
                    pair.meta.amplitude_v = need_number();
                } else if (key == "f1_hz") {
                    pair.meta.f1_hz = need_number();
                } else if (key == "f2_hz") {
                    pair.meta.f2_hz = need_number();
                } else if (key == "seed") {
                    pair.meta.seed = need_integer();
                } else if (key == "capture_index") {
                    pair.meta.capture_index = need_integer();
                }
                continue;
            }
            if (trim(line) != kCsvHeader)
                throw meta_error("expected header '" + std::string(kCsvHeader) + "', found '" + line + "'");
            seen_header = true;
            continue;
        }

        if (line.empty())
            continue;
        double cells[3];
        std::size_t col = 0;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            const auto cell = rest.substr(0, comma);
            if (col >= 3)
                throw meta_error("too many columns (expected 3)");
            if (!parse_double(cell, cells[col]))
                throw meta_error("column " + std::to_string(col + 1) + " is not a finite number: '" +
                                 std::string(cell) + "'");
            ++col;
            if (comma == std::string_view::npos)
                break;
            rest.remove_prefix(comma + 1);
        }
        if (col != 3)
            throw meta_error("row has " + std::to_string(col) + " columns; channels must have equal row counts");
        times.push_back(cells[0]);
        row_lines.push_back(line_no);
        pair.stimulus.samples.push_back(cells[1]);
        pair.response.samples.push_back(cells[2]);
    }

    if (!seen_header)
        throw ParseError(source_name, line_no, "missing header '" + std::string(kCsvHeader) + "'");
    if (times.empty())
        throw ParseError(source_name, line_no, "no data rows");

    double rate = header_rate;
    if (rate == 0.0) {
        if (times.size() < 2)
            throw ParseError(source_name, line_no, "cannot infer sample rate from a single row");
        const double dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
        if (!(dt > 0))
            throw ParseError(source_name, line_no, "time column is not increasing");
        rate = 1.0 / dt;
    }
    // Time column must be t0 + k / fs.
    const double dt = 1.0 / rate;
    for (std::size_t k = 0; k < times.size(); ++k) {
        const double expected = times.front() + static_cast<double>(k) * dt;
        if (std::abs(times[k] - expected) > 1e-6 * dt + 1e-12 * std::abs(expected)) {
            line_no = row_lines[k];
            throw meta_error("time column is not a uniform progression with step 1/fs");
        }
    }
    pair.stimulus.sample_rate_hz = rate;
    pair.response.sample_rate_hz = rate;
    return pair;
}

CapturePair read_capture_csv(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
    return read_capture_csv(in, path.string());
}

// ---------------------------------------------------------------------------
// Plans

std::vector<siggen::BandSpec> contiguous_bands(double lo_hz, double hi_hz, std::size_t count)
{
    if (count == 0 || !(hi_hz > lo_hz))
        fail("contiguous_bands: need count >= 1 and hi > lo");
    std::vector<siggen::BandSpec> bands(count);
    const double width = (hi_hz - lo_hz) / static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
        bands[i].f_start_hz = lo_hz + width * static_cast<double>(i);
        bands[i].f_end_hz = (i + 1 == count) ? hi_hz : lo_hz + width * static_cast<double>(i + 1);
    }
    return bands;
}

DatasetPlan lab_plan()
{
    DatasetPlan p;
    p.sample_rate_hz = 25e9;
    p.samples_per_file = 50000;
    p.n_fft = 25000;
    p.training = {1.2, 300};
    p.time_test = {1.0, contiguous_bands(0.0, 3e9, 30)};
    p.sine = {0.2, 30e6, 3e9, 100};
    p.dual = {0.2, 30e6, 2e9, 100, 2};
    p.power_sweeps = {{0.9e9, -20, -5, 100}, {1.9e9, -20, -5, 100}};
    return p;
}

DatasetPlan desk_plan()
{
    // Frequencies are the lab layout scaled so that its 3 GHz band maps
    // to 0.4 fs.
    constexpr double band = 0.4;
    constexpr double scale = band / 3e9;
    DatasetPlan p;
    p.sample_rate_hz = 1.0;
    p.samples_per_file = 8192;
    p.n_fft = 5000;
    p.training = {1.2, 20};
    p.time_test = {1.0, contiguous_bands(0.0, band, 6)};
    p.sine = {0.2, 30e6 * scale, band, 10};
    p.dual = {0.2, 30e6 * scale, 2e9 * scale, 10, 2};
    p.power_sweeps = {{0.9e9 * scale, -20, -5, 10}, {1.9e9 * scale, -20, -5, 10}};
    return p;
}

double snap_to_bin(double f_hz, double sample_rate_hz, std::size_t n_fft)
{
    const double bin = sample_rate_hz / static_cast<double>(n_fft);
    return std::round(f_hz / bin) * bin;
}

namespace {

double linspace_at(double lo, double hi, std::size_t count, std::size_t i)
{
    if (count == 1)
        return lo;
    return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
}

}  // namespace

std::vector<double> sine_sweep_frequencies(double f_lo_hz, double f_hi_hz, std::size_t count, double sample_rate_hz,
                                           std::size_t n_fft)
{
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = snap_to_bin(linspace_at(f_lo_hz, f_hi_hz, count, i), sample_rate_hz, n_fft);
    return out;
}

std::vector<TonePair> dual_tone_sweep(double center_lo_hz, double center_hi_hz, std::size_t count,
                                      double sample_rate_hz, std::size_t n_fft, std::size_t spacing_bins)
{
    const double bin = sample_rate_hz / static_cast<double>(n_fft);
    const auto s = static_cast<long long>(spacing_bins);
    std::vector<TonePair> out(count);
    for (std::size_t i = 0; i < count; ++i) {
        const long long center = std::llround(linspace_at(center_lo_hz, center_hi_hz, count, i) / bin);
        const long long k1 = center - s / 2;
        out[i] = {static_cast<double>(k1) * bin, static_cast<double>(k1 + s) * bin};
    }
    return out;
}

void validate(const DatasetPlan& plan)
{
    if (!(plan.sample_rate_hz > 0))
        fail("plan: sample_rate_hz must be positive");
    if (plan.n_fft < 16)
        fail("plan: n_fft must be at least 16");
    if (plan.samples_per_file < 16)
        fail("plan: samples_per_file must be at least 16");
    if (plan.training.count == 0 || !(plan.training.amplitude_vpp >= 0))
        fail("plan: training needs count >= 1 and a non-negative amplitude");
    if (plan.time_test.bands.empty())
        fail("plan: time_test needs at least one band");
    const double nyquist = plan.sample_rate_hz / 2;
    for (std::size_t i = 0; i < plan.time_test.bands.size(); ++i) {
        const auto& b = plan.time_test.bands[i];
        if (!(b.f_start_hz >= 0) || !(b.f_end_hz > b.f_start_hz) || b.f_end_hz > nyquist)
            fail("plan: time_test band " + std::to_string(i) + " is invalid or beyond Nyquist");
        if (i > 0 && b.f_start_hz < plan.time_test.bands[i - 1].f_end_hz)
            fail("plan: time_test bands must be ordered and non-overlapping");
    }
    if (plan.sine.count == 0 || plan.dual.count == 0)
        fail("plan: sweep counts must be >= 1");
    if (!(plan.sine.f_lo_hz > 0) || !(plan.sine.f_hi_hz >= plan.sine.f_lo_hz) || !(plan.sine.f_hi_hz < nyquist))
        fail("plan: sine sweep must lie in (0, Nyquist)");
    const auto sine_f = sine_sweep_frequencies(plan.sine.f_lo_hz, plan.sine.f_hi_hz, plan.sine.count,
                                               plan.sample_rate_hz, plan.n_fft);
    for (std::size_t i = 0; i < sine_f.size(); ++i) {
        if (!(sine_f[i] > 0) || (i > 0 && !(sine_f[i] > sine_f[i - 1])))
            fail("plan: sine sweep points collapse onto the same FFT bin; increase n_fft or reduce count");
    }
    if (plan.dual.spacing_bins < 2)
        fail("plan: dual-tone spacing must be at least 2 bins");
    const double bin = plan.sample_rate_hz / static_cast<double>(plan.n_fft);
    const auto pairs = dual_tone_sweep(plan.dual.f_lo_hz, plan.dual.f_hi_hz, plan.dual.count, plan.sample_rate_hz,
                                       plan.n_fft, plan.dual.spacing_bins);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const double lower_im3 = 2 * pairs[i].f1_hz - pairs[i].f2_hz;
        const double upper_im3 = 2 * pairs[i].f2_hz - pairs[i].f1_hz;
        if (lower_im3 < 0.5 * bin || upper_im3 > nyquist - 0.5 * bin)
            fail("plan: dual-tone point " + std::to_string(i) + " puts an IM3 product outside (0, Nyquist)");
        if (i > 0 && !(pairs[i].f1_hz > pairs[i - 1].f1_hz))
            fail("plan: dual-tone sweep points collapse onto the same FFT bin");
    }
    for (std::size_t j = 0; j < plan.power_sweeps.size(); ++j) {
        const auto& ps = plan.power_sweeps[j];
        if (ps.count == 0 || !(ps.f_hz > 0) || !(ps.f_hz < nyquist) || !(ps.p_hi_dbm >= ps.p_lo_dbm))
            fail("plan: power sweep " + std::to_string(j) + " is invalid");
    }
}

std::vector<PlannedCapture> plan_captures(const DatasetPlan& plan, std::uint64_t master_seed)
{
    validate(plan);
    std::vector<PlannedCapture> out;
    auto add = [&](CaptureMeta meta) {
        meta.capture_index = out.size();
        meta.seed = derive_seed(master_seed, meta.capture_index);
        char name[64];
        std::snprintf(name, sizeof name, "capture_%04zu_%s.csv", meta.capture_index,
                      std::string(to_string(meta.kind)).c_str());
        out.push_back({meta, name});
    };

    for (std::size_t i = 0; i < plan.training.count; ++i)
        add({WaveformKind::uniform_noise, "training", plan.training.amplitude_vpp / 2, 0, 0, 0, 0});
    for (const auto& b : plan.time_test.bands)
        add({WaveformKind::band_noise, "time_test", plan.time_test.amplitude_vpp / 2, b.f_start_hz, b.f_end_hz, 0, 0});
    for (double f : sine_sweep_frequencies(plan.sine.f_lo_hz, plan.sine.f_hi_hz, plan.sine.count,
                                           plan.sample_rate_hz, plan.n_fft))
        add({WaveformKind::sine, "sine_sweep", plan.sine.amplitude_vpp / 2, f, 0, 0, 0});
    for (const auto& tp : dual_tone_sweep(plan.dual.f_lo_hz, plan.dual.f_hi_hz, plan.dual.count, plan.sample_rate_hz,
                                          plan.n_fft, plan.dual.spacing_bins))
        add({WaveformKind::dual_tone, "dual_tone", plan.dual.amplitude_vpp / 2, tp.f1_hz, tp.f2_hz, 0, 0});
    for (std::size_t j = 0; j < plan.power_sweeps.size(); ++j) {
        const auto& ps = plan.power_sweeps[j];
        const double f = snap_to_bin(ps.f_hz, plan.sample_rate_hz, plan.n_fft);
        for (std::size_t i = 0; i < ps.count; ++i) {
            const double p = linspace_at(ps.p_lo_dbm, ps.p_hi_dbm, ps.count, i);
            add({WaveformKind::power_sweep, "power_sweep_" + std::to_string(j), siggen::dbm_to_amplitude(p, plan.z_ohm),
                 f, 0, 0, 0});
        }
    }
    return out;
}

Waveform synthesize_stimulus(const CaptureMeta& meta, std::size_t n, double sample_rate_hz)
{
    switch (meta.kind) {
    case WaveformKind::uniform_noise:
        return siggen::gen_uniform_noise(n, meta.amplitude_v, sample_rate_hz, meta.seed);
    case WaveformKind::band_noise:
        return siggen::gen_narrowband_noise(n, {meta.f1_hz, meta.f2_hz}, meta.amplitude_v, sample_rate_hz, meta.seed);
    case WaveformKind::sine:
    case WaveformKind::power_sweep:
        return siggen::gen_sine(n, {meta.f1_hz, meta.amplitude_v, 0.0}, sample_rate_hz);
    case WaveformKind::dual_tone:
        return siggen::gen_dual_tone(n, meta.f1_hz, meta.f2_hz, meta.amplitude_v, sample_rate_hz);
    }
    fail("unknown waveform kind");
}

std::vector<ManifestEntry> Manifest::group(std::string_view name) const
{
    std::vector<ManifestEntry> out;
    for (const auto& e : entries) {
        if (e.meta.group == name)
            out.push_back(e);
    }
    return out;
}

std::uint64_t noise_seed(const CaptureMeta& meta) { return derive_seed(meta.seed, 1); }

Manifest build_dataset_suite(const DatasetPlan& plan, const dutsim::DutSpec& dut, const fs::path& out_dir,
                             std::uint64_t seed)
{
    dutsim::validate(dut);
    const auto planned = plan_captures(plan, seed);
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec)
        throw Error(ErrorCode::io, "cannot create '" + out_dir.string() + "': " + ec.message());

    Manifest manifest;
    for (const auto& pc : planned) {
        const auto stimulus = synthesize_stimulus(pc.meta, plan.samples_per_file, plan.sample_rate_hz);
        const auto pair = acquire(dut, stimulus, noise_seed(pc.meta), pc.meta);
        const auto path = out_dir / pc.file_name;
        write_capture_csv(pair, path);
        manifest.entries.push_back({pc.meta, path});
    }
    write_manifest(manifest, out_dir / kManifestName);
    return manifest;
}

void write_manifest(const Manifest& manifest, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    for (const auto& e : manifest.entries) {
        nlohmann::ordered_json j;
        j["index"] = e.meta.capture_index;
        j["kind"] = std::string(to_string(e.meta.kind));
        j["group"] = e.meta.group;
        j["amplitude_v"] = e.meta.amplitude_v;
        j["f1_hz"] = e.meta.f1_hz;
        j["f2_hz"] = e.meta.f2_hz;
        j["seed"] = e.meta.seed;
        j["path"] = e.path.filename().string();
        out << j.dump() << '\n';
    }
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

Manifest read_manifest(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open manifest '" + path.string() + "'");
    const auto dir = path.parent_path();
    Manifest m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty())
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            ManifestEntry e;
            e.meta.capture_index = j.at("index").get<std::size_t>();
            e.meta.kind = parse_kind(j.at("kind").get<std::string>());
            e.meta.group = j.at("group").get<std::string>();
            e.meta.amplitude_v = j.at("amplitude_v").get<double>();
            e.meta.f1_hz = j.at("f1_hz").get<double>();
            e.meta.f2_hz = j.at("f2_hz").get<double>();
            e.meta.seed = j.at("seed").get<std::uint64_t>();
            e.path = dir / j.at("path").get<std::string>();
            m.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw ParseError(path.string(), line_no, ex.what());
        } catch (const Error& ex) {
            throw ParseError(path.string(), line_no, ex.what());
        }
    }
    return m;
}

}  // namespace rfmodel::testbench
