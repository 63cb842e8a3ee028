// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
//   acceptance <path-to-rfmodel-binary> [criterion numbers...]

#include "rfmodel/cli/commands.hpp"
#include "rfmodel/cli/config.hpp"
#include "rfmodel/dutsim.hpp"
#include "rfmodel/error.hpp"
#include "rfmodel/metrics.hpp"
#include "rfmodel/nn/model.hpp"
#include "rfmodel/pipeline.hpp"
#include "rfmodel/rng.hpp"
#include "rfmodel/siggen.hpp"
#include "rfmodel/testbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

using namespace rfmodel;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

class Stopwatch {
public:
    double seconds() const
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("rfmodel_acceptance_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// ---------------------------------------------------------------------------

Outcome gradient_correctness()
{
    Stopwatch sw;
    std::ostringstream sink;
    cli::Logger log(cli::LogLevel::quiet, &sink);
    const auto r = cli::cmd_gradcheck(log);
    const double t = sw.seconds();
    return {r.passed && r.max_rel_error < 1e-5 && t < 30.0,
            "max relative error " + fmt("%.2e", r.max_rel_error) + " (< 1e-5) over residual and autoencoder nets, " +
                fmt("%.1f", t) + " s (< 30 s)"};
}

Outcome delay_compensation()
{
    constexpr std::size_t n = 4096;
    constexpr int cases = 1000;
    int clean_ok = 0, noisy_ok = 0;
    Rng rng(20240501);
    for (int c = 0; c < cases; ++c) {
        const auto seed = rng.next_u64();
        Waveform x;
        if (c % 2 == 0) {
            x = siggen::gen_uniform_noise(n, rng.uniform(0.1, 1.0), 1.0, seed);
        } else {
            const double lo = rng.uniform(0.0, 0.35);
            x = siggen::gen_narrowband_noise(n, {lo, lo + rng.uniform(0.1, 0.15)}, rng.uniform(0.1, 1.0), 1.0, seed);
        }
        const long d = long(rng.below(1025)) - 512;
        const int sign = rng.below(2) ? 1 : -1;
        Waveform y;
        y.sample_rate_hz = 1.0;
        y.samples.assign(n, 0.0);
        for (long k = 0; k < long(n); ++k)
            if (k - d >= 0 && k - d < long(n))
                y.samples[std::size_t(k)] = sign * x.samples[std::size_t(k - d)];

        const auto clean = pipeline::estimate_delay(x, y, 512);
        clean_ok += (clean.lag == d && clean.sign == sign);

        double power = 0;
        for (double v : y.samples)
            power += v * v;
        const double sigma = std::sqrt(power / double(n)) * std::pow(10.0, -40.0 / 20.0);
        Rng noise(seed, 7);
        for (auto& v : y.samples)
            v += sigma * noise.normal();
        const auto noisy = pipeline::estimate_delay(x, y, 512);
        noisy_ok += (noisy.lag == d && noisy.sign == sign);
    }
    const bool pass = clean_ok == cases && noisy_ok >= 999;
    return {pass, std::to_string(clean_ok) + "/1000 exact at sigma = 0 (need 1000), " + std::to_string(noisy_ok) +
                      "/1000 at 40 dB SNR (need >= 999)"};
}

Outcome metrology_vs_oracle()
{
    Stopwatch sw;
    auto dut = dutsim::pw210_like();
    dut.noise_sigma_v = 0;
    metrics::DutResponse self(dut, 0);
    metrics::SweepSettings s;
    s.sample_rate_hz = 1.0;
    s.window = {64, 5000, 50.0};

    const auto freqs = testbench::sine_sweep_frequencies(0.004, 0.4, 100, 1.0, 5000);
    const auto gain = metrics::gain_frequency_curve(self, dut, freqs, siggen::dbm_to_amplitude(-40.0), s);
    double gain_err = 0;
    for (const auto& p : gain.points)
        gain_err = std::max(gain_err, std::abs(p.measured - dutsim::analytic_small_signal_gain_db(dut, p.x, 1.0)));

    // Tones two bins apart see the same |H| to within a fraction of a
    // percent everywhere in the band, so the whole sweep counts as flat.
    const auto pairs = testbench::dual_tone_sweep(0.004, 0.4, 100, 1.0, 5000, 2);
    const auto oip3 = metrics::oip3_frequency_curve(self, dut, pairs, siggen::dbm_to_amplitude(-30.0), s);
    const double oracle = *dutsim::analytic_oip3_dbm(dut, 0.1, 50.0);
    double oip3_err = 0;
    bool reliable = oip3.unreliable_count() == 0;
    for (const auto& p : oip3.points)
        oip3_err = std::max(oip3_err, std::abs(p.measured - oracle));
    const double t = sw.seconds();
    return {gain_err < 0.1 && oip3_err < 0.1 && reliable && t < 60.0,
            "max gain error " + fmt("%.4f", gain_err) + " dB over 100 points, max OIP3 error " +
                fmt("%.4f", oip3_err) + " dB over 100 pairs (both < 0.1 dB), " + fmt("%.1f", t) + " s (< 60 s)"};
}

struct TrainedRun {
    cli::RunConfig cfg;
    cli::TrainSummary summary;
    double train_seconds = 0;
    bool ok = false;
    std::string error;
};

// Criteria 4 and 5 share one desk-scale run.
TrainedRun& desk_run()
{
    static TrainedRun run = [] {
        TrainedRun r;
        r.cfg = cli::desk_config();
        r.cfg.root = scratch("desk");
        std::ostringstream sink;
        cli::Logger log(cli::LogLevel::quiet, &sink);
        try {
            cli::cmd_generate(r.cfg, log);
            Stopwatch sw;
            r.summary = cli::cmd_train(r.cfg, log);
            r.train_seconds = sw.seconds();
            r.ok = true;
        } catch (const std::exception& e) {
            r.error = e.what();
        }
        return r;
    }();
    return run;
}

Outcome training_efficacy()
{
    auto& run = desk_run();
    if (!run.ok)
        return {false, "desk run failed: " + run.error};
    const auto& s = run.summary;
    const std::size_t n_train = run.cfg.plan.training.count - run.cfg.data.val_files;
    const bool pass = n_train == 20 && s.best_val_mse <= 5e-4 && s.test_mse <= 1e-3 && run.train_seconds <= 600;
    return {pass, "trained on " + std::to_string(n_train) + " noise files: val MSE " + fmt("%.2e", s.best_val_mse) +
                      " (<= 5e-4), band-noise test MSE " + fmt("%.2e", s.test_mse) + " (<= 1e-3), " +
                      fmt("%.0f", run.train_seconds) + " s (<= 600 s)"};
}

Outcome generalization()
{
    auto& run = desk_run();
    if (!run.ok)
        return {false, "desk run failed: " + run.error};
    std::ostringstream sink;
    cli::Logger log(cli::LogLevel::quiet, &sink);
    auto worst = [](const metrics::MetricCurve& c, bool& reliable) {
        double w = 0;
        for (const auto& p : c.points) {
            if (!p.measured_ok || !p.predicted_ok) {
                reliable = false;
                continue;
            }
            w = std::max(w, std::abs(p.predicted - p.measured));
        }
        return w;
    };
    bool reliable = true;
    const auto gf = cli::cmd_eval(run.cfg, cli::EvalMode::gain_freq, log).curves;
    const auto gp = cli::cmd_eval(run.cfg, cli::EvalMode::gain_power, log).curves;
    const auto ip = cli::cmd_eval(run.cfg, cli::EvalMode::oip3, log).curves;
    double e_gf = 0, e_gp = 0, e_ip = 0;
    for (const auto& c : gf)
        e_gf = std::max(e_gf, worst(c, reliable));
    for (const auto& c : gp)
        e_gp = std::max(e_gp, worst(c, reliable));
    for (const auto& c : ip)
        e_ip = std::max(e_ip, worst(c, reliable));
    const bool pass = reliable && !gf.empty() && !gp.empty() && !ip.empty() && e_gf <= 1.0 && e_gp <= 1.0 && e_ip <= 3.0;
    return {pass, "max |predicted - measured|: gain-frequency " + fmt("%.3f", e_gf) + " dB (<= 1), gain-power " +
                      fmt("%.3f", e_gp) + " dB (<= 1), OIP3 " + fmt("%.3f", e_ip) + " dB (<= 3)" +
                      (reliable ? "" : "; some readings were unreliable")};
}

Outcome frequency_resolution()
{
    const bool exact = metrics::freq_resolution(25e9, 25000) == 1e6;
    std::size_t checked = 0, narrow = 0;
    Rng rng(77);
    for (int i = 0; i < 2000; ++i) {
        const std::size_t n_fft = 64 + rng.below(50000);
        const double fs = std::pow(10.0, rng.uniform(0.0, 10.5));
        const std::size_t spacing = 2 + rng.below(6);
        const double res = fs / double(n_fft);
        const double lo = rng.uniform(0.05, 0.2) * fs;
        const double hi = lo + rng.uniform(0.0, 0.2) * fs;
        const std::size_t count = 1 + rng.below(120);
        for (const auto& p : testbench::dual_tone_sweep(lo, hi, count, fs, n_fft, spacing)) {
            ++checked;
            if ((p.f2_hz - p.f1_hz) / res < 2.0 - 1e-9)
                ++narrow;
        }
    }
    for (const auto& plan : {testbench::lab_plan(), testbench::desk_plan()}) {
        const double res = plan.sample_rate_hz / double(plan.n_fft);
        for (const auto& pc : testbench::plan_captures(plan, 1))
            if (pc.meta.kind == testbench::WaveformKind::dual_tone) {
                ++checked;
                if ((pc.meta.f2_hz - pc.meta.f1_hz) / res < 2.0 - 1e-9)
                    ++narrow;
            }
    }
    return {exact && narrow == 0,
            std::string("freq_resolution(25 GHz, 25000) ") + (exact ? "== 1 MHz exactly" : "!= 1 MHz") + ", " +
                std::to_string(narrow) + " of " + std::to_string(checked) + " planned tone pairs closer than 2 bins"};
}

Outcome dbm_correspondences()
{
    const double p10 = siggen::amplitude_to_dbm(2.0 / 2);
    // 1.12 Vpp is the three-digit rounding of the 5 dBm amplitude;
    // compare at that precision and at the exact amplitude.
    const double vpp5 = 2.0 * siggen::dbm_to_amplitude(5.0);
    const bool rounds = std::abs(std::round(vpp5 * 100.0) / 100.0 - 1.12) < 1e-12;
    const double p5 = siggen::amplitude_to_dbm(vpp5 / 2);
    const double literal = siggen::amplitude_to_dbm(1.12 / 2);
    const bool pass = std::abs(p10 - 10.0) <= 0.01 && rounds && std::abs(p5 - 5.0) <= 0.01;
    return {pass, "2 Vpp -> " + fmt("%.4f", p10) + " dBm; 5 dBm -> " + fmt("%.4f", vpp5) + " Vpp (rounds to 1.12) -> " +
                      fmt("%.4f", p5) + " dBm; literal 1.120 Vpp -> " + fmt("%.4f", literal) + " dBm"};
}

std::map<std::string, std::string> snapshot(const fs::path& dir)
{
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file() || e.path().filename() == cli::kLogName)
            continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).generic_string()] = ss.str();
    }
    return out;
}

Outcome determinism(const std::string& tool)
{
    if (tool.empty() || !fs::exists(tool))
        return {false, "rfmodel binary not found: '" + tool + "'"};
    const auto base = scratch("determinism");
    const auto config = base / "config.json";
    {
        std::ofstream(config) << R"({
  "plan": {"training": {"count": 5}},
  "train": {"epochs": 3, "val_files": 1, "window_count": 256, "batch_size": 64},
  "arch": {"hidden_width": 16, "n_blocks": 2}
})";
    }
    std::map<std::string, std::string> runs[2];
    for (int r = 0; r < 2; ++r) {
        const auto dir = base / ("run" + std::to_string(r));
        for (const char* cmd : {"generate", "train", "eval --which all"}) {
            const std::string line = "RFMODEL_LOG=quiet \"" + tool + "\" " + cmd + " --config \"" + config.string() +
                                     "\" --seed 11 --out \"" + dir.string() + "\" > /dev/null 2>&1";
            if (const int rc = std::system(line.c_str()); rc != 0)
                return {false, std::string("'") + cmd + "' exited with status " + std::to_string(rc)};
        }
        runs[r] = snapshot(dir);
    }
    std::size_t differing = 0;
    std::string first;
    for (const auto& [name, content] : runs[0]) {
        const auto it = runs[1].find(name);
        if (it == runs[1].end() || it->second != content) {
            ++differing;
            if (first.empty())
                first = name;
        }
    }
    differing += runs[1].size() > runs[0].size() ? runs[1].size() - runs[0].size() : 0;
    fs::remove_all(base);
    return {differing == 0 && runs[0].size() > 10,
            std::to_string(runs[0].size()) + " artifacts compared byte for byte across two runs (run log excluded), " +
                std::to_string(differing) + " differ" + (first.empty() ? "" : " (first: " + first + ")")};
}

double random_double(Rng& rng)
{
    switch (rng.below(4)) {
    case 0: return rng.uniform(-1.0, 1.0);
    case 1: return rng.normal() * std::pow(10.0, rng.uniform(-300.0, 300.0));
    case 2: {
        // Arbitrary finite bit pattern, subnormals included.
        for (;;) {
            const std::uint64_t bits = rng.next_u64();
            double v;
            std::memcpy(&v, &bits, sizeof v);
            if (std::isfinite(v))
                return v;
        }
    }
    default: return rng.below(2) ? 0.0 : -0.0;
    }
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b)
{
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

Outcome format_round_trip()
{
    constexpr int cases = 10000;
    const char* groups[] = {"training", "time_test", "sine_sweep", "dual_tone", "power_sweep_0"};
    Rng rng(909);
    int ok = 0;
    std::string first_error;
    for (int c = 0; c < cases; ++c) {
        testbench::CapturePair p;
        const std::size_t n = 1 + rng.below(64);
        const double fs = std::pow(10.0, rng.uniform(-2.0, 11.0));
        p.stimulus.sample_rate_hz = p.response.sample_rate_hz = fs;
        for (std::size_t i = 0; i < n; ++i) {
            p.stimulus.samples.push_back(random_double(rng));
            p.response.samples.push_back(random_double(rng));
        }
        p.meta.kind = testbench::WaveformKind(rng.below(5));
        p.meta.group = groups[rng.below(5)];
        p.meta.amplitude_v = rng.uniform(0.0, 2.0);
        p.meta.f1_hz = rng.uniform(0.0, fs / 2);
        p.meta.f2_hz = rng.uniform(0.0, fs / 2);
        p.meta.seed = rng.next_u64();
        p.meta.capture_index = rng.below(1000000);
        try {
            std::stringstream io;
            testbench::write_capture_csv(p, io);
            const auto back = testbench::read_capture_csv(io, "case " + std::to_string(c));
            if (same_bits(back.stimulus.samples, p.stimulus.samples) &&
                same_bits(back.response.samples, p.response.samples) && back.meta == p.meta &&
                back.stimulus.sample_rate_hz == fs && back.response.sample_rate_hz == fs)
                ++ok;
            else if (first_error.empty())
                first_error = "case " + std::to_string(c) + " changed";
        } catch (const std::exception& e) {
            if (first_error.empty())
                first_error = e.what();
        }
    }
    // A few through real files as well.
    const auto dir = scratch("csv");
    int file_ok = 0;
    for (int c = 0; c < 20; ++c) {
        testbench::CapturePair p;
        for (int i = 0; i < 100; ++i) {
            p.stimulus.samples.push_back(random_double(rng));
            p.response.samples.push_back(random_double(rng));
        }
        const auto path = dir / ("c" + std::to_string(c) + ".csv");
        testbench::write_capture_csv(p, path);
        const auto back = testbench::read_capture_csv(path);
        file_ok += same_bits(back.stimulus.samples, p.stimulus.samples) &&
                   same_bits(back.response.samples, p.response.samples);
    }
    fs::remove_all(dir);
    return {ok == cases && file_ok == 20, std::to_string(ok) + "/10000 random pairs bit-exact through CSV text, " +
                                              std::to_string(file_ok) + "/20 through files" +
                                              (first_error.empty() ? "" : "; first problem: " + first_error)};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::string tool = argc > 1 ? argv[1] : "";
    std::set<int> only;
    for (int i = 2; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"gradient correctness", gradient_correctness},
        {"delay compensation", delay_compensation},
        {"metrology vs oracle", metrology_vs_oracle},
        {"training efficacy", training_efficacy},
        {"generalization", generalization},
        {"frequency resolution", frequency_resolution},
        {"dBm correspondences", dbm_correspondences},
        {"determinism", [&] { return determinism(tool); }},
        {"format round trip", format_round_trip},
    };

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!only.empty() && !only.count(id))
            continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("criterion %d (%s): %s: %s\n", id, criteria[i].first.c_str(), o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
    }
    fs::remove_all(fs::temp_directory_path() / "rfmodel_acceptance_desk");
    return failures == 0 ? 0 : 1;
}
