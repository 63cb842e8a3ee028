#include "rfmodel/cli/commands.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/pipeline.hpp"
#include "rfmodel/report.hpp"
#include "rfmodel/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <iostream>
#include <map>

namespace rfmodel::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Logging and locking

LogLevel log_level_from_env()
{
    const char* v = std::getenv("RFMODEL_LOG");
    if (!v || !*v)
        return LogLevel::info;
    const std::string s(v);
    if (s == "quiet")
        return LogLevel::quiet;
    if (s == "debug")
        return LogLevel::debug;
    return LogLevel::info;
}

Logger::Logger(LogLevel level, std::ostream* console) : level_(level), console_(console ? console : &std::cout) {}

void Logger::attach_file(const fs::path& path)
{
    file_.open(path, std::ios::app);
    if (!file_)
        throw Error(ErrorCode::io, "cannot open log file '" + path.string() + "'");
}

void Logger::emit(const char* tag, const std::string& msg, bool to_console)
{
    if (to_console)
        *console_ << msg << '\n' << std::flush;
    if (file_.is_open()) {
        const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm utc{};
        gmtime_r(&now, &utc);
        char stamp[32];
        std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &utc);
        file_ << stamp << ' ' << tag << ' ' << msg << '\n' << std::flush;
    }
}

void Logger::info(const std::string& msg) { emit("INFO", msg, level_ != LogLevel::quiet); }
void Logger::debug(const std::string& msg) { emit("DEBUG", msg, level_ == LogLevel::debug); }

void Logger::warn(const std::string& msg)
{
    std::cerr << "warning: " << msg << '\n';
    emit("WARN", msg, false);
}

DirLock::DirLock(const fs::path& dir) : path_(dir / kLockName)
{
    // "x" makes fopen fail if the file already exists.
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
        throw Error(ErrorCode::io, "output directory '" + dir.string() + "' is locked by another run (remove '" +
                                       path_.string() + "' if no run is active)");
    std::fclose(f);
}

DirLock::~DirLock()
{
    std::error_code ec;
    fs::remove(path_, ec);
}

namespace {

void ensure_dir(const fs::path& dir)
{
    if (fs::is_directory(dir))
        return;
    if (fs::exists(dir))
        throw Error(ErrorCode::io, "'" + dir.string() + "' exists but is not a directory");
    const fs::path parent = dir.parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw Error(ErrorCode::io, "cannot create '" + dir.string() + "': parent directory '" + parent.string() +
                                       "' does not exist");
    std::error_code ec;
    fs::create_directory(dir, ec);
    if (ec)
        throw Error(ErrorCode::io, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

testbench::Manifest open_manifest(const RunConfig& cfg)
{
    const fs::path path = cfg.data_dir() / testbench::kManifestName;
    if (!fs::exists(path))
        throw Error(ErrorCode::io, "no dataset manifest at '" + path.string() + "'; run 'generate' first");
    return testbench::read_manifest(path);
}

std::vector<testbench::ManifestEntry> require_group(const testbench::Manifest& m, const std::string& name)
{
    auto entries = m.group(name);
    if (entries.empty())
        throw Error(ErrorCode::io, "dataset manifest has no '" + name + "' captures");
    return entries;
}

struct Aligned {
    testbench::CapturePair pair;
    long lag = 0;
};

Aligned load_aligned(const testbench::ManifestEntry& e, std::size_t max_lag)
{
    const auto pair = testbench::read_capture_csv(e.path);
    const auto d = pipeline::estimate_delay(pair.stimulus, pair.response, max_lag);
    return {pipeline::align(pair, d.lag), d.lag};
}

std::size_t available_windows(const testbench::CapturePair& p, std::size_t window)
{
    return p.size() >= window ? p.size() - window + 1 : 0;
}

}  // namespace

// ---------------------------------------------------------------------------
// generate

testbench::Manifest cmd_generate(const RunConfig& cfg, Logger& log)
{
    cfg.validate();
    ensure_dir(cfg.data_dir());
    log.debug("generating into " + cfg.data_dir().string());
    auto manifest = testbench::build_dataset_suite(cfg.plan, cfg.dut, cfg.data_dir(), cfg.seed);

    std::map<std::string, std::size_t> counts;
    for (const auto& e : manifest.entries)
        ++counts[e.meta.group];
    log.info("wrote " + std::to_string(manifest.entries.size()) + " captures and " + std::string(testbench::kManifestName) +
             " to " + cfg.data_dir().string());
    for (const auto& [group, n] : counts)
        log.info("  " + group + ": " + std::to_string(n));
    return manifest;
}

// ---------------------------------------------------------------------------
// train

TrainSummary cmd_train(const RunConfig& cfg, Logger& log)
{
    cfg.validate();
    const auto manifest = open_manifest(cfg);
    const auto files = require_group(manifest, "training");
    if (files.size() <= cfg.data.val_files)
        throw Error(ErrorCode::config, "config field 'train.val_files': dataset has only " +
                                           std::to_string(files.size()) + " training captures");
    const std::size_t n_train = files.size() - cfg.data.val_files;

    TrainSummary out;
    std::vector<testbench::CapturePair> train_pairs, val_pairs;
    for (std::size_t i = 0; i < files.size(); ++i) {
        auto a = load_aligned(files[i], cfg.data.max_lag);
        log.debug(files[i].path.filename().string() + ": delay " + std::to_string(a.lag) + " samples");
        out.train_lags.push_back(a.lag);
        (i < n_train ? train_pairs : val_pairs).push_back(std::move(a.pair));
    }
    const auto stats = pipeline::fit_norm_stats(train_pairs);

    const std::size_t w = cfg.arch.input_width;
    auto windows = [&](const std::vector<testbench::CapturePair>& pairs, std::size_t first, std::uint64_t stream) {
        pipeline::WindowedDataset ds;
        ds.window = w;
        ds.stats = stats;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const std::size_t count = std::min(cfg.data.window_count, available_windows(pairs[i], w));
            ds.append(pipeline::extract_windows(pairs[i], stats, w, count, derive_seed(cfg.seed, stream + i),
                                                files[first + i].path.filename().string()));
        }
        return ds;
    };
    const auto train_set = windows(train_pairs, 0, 0x1000);
    const auto val_set = windows(val_pairs, n_train, 0x2000);
    log.info("training on " + std::to_string(train_set.size()) + " windows from " + std::to_string(n_train) +
             " captures, validating on " + std::to_string(val_set.size()));

    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, 2);
    out.model = nn::train(cfg.arch, train_set, val_set, tc, [&](const nn::EpochRecord& r) {
        log.info("epoch " + std::to_string(r.epoch) + "/" + std::to_string(tc.epochs) + "  train " +
                 fmt("%.3e", r.train_mse) + "  val " + fmt("%.3e", r.val_mse));
    });
    out.best_val_mse = out.model.history.at(out.model.best_epoch - 1).val_mse;

    // Band-limited noise never enters training; it measures generalization.
    const auto tests = manifest.group("time_test");
    if (!tests.empty()) {
        pipeline::WindowedDataset test_set;
        test_set.window = w;
        test_set.stats = stats;
        for (std::size_t i = 0; i < tests.size(); ++i) {
            const auto a = load_aligned(tests[i], cfg.data.max_lag);
            const std::size_t count = std::min(cfg.data.window_count, available_windows(a.pair, w));
            test_set.append(pipeline::extract_windows(a.pair, stats, w, count, derive_seed(cfg.seed, 0x3000 + i),
                                                      tests[i].path.filename().string()));
        }
        out.test_mse = nn::evaluate_mse(out.model, test_set);
    }

    out.model_path = cfg.model_path();
    if (out.model_path.has_parent_path())
        ensure_dir(out.model_path.parent_path());
    nn::save_model(out.model, out.model_path);

    out.history_path = out.model_path;
    out.history_path.replace_extension(".history.csv");
    std::ofstream hist(out.history_path, std::ios::binary);
    if (!hist)
        throw Error(ErrorCode::io, "cannot open '" + out.history_path.string() + "' for writing");
    hist << "epoch,train_mse,val_mse\n";
    for (const auto& r : out.model.history) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", r.epoch, r.train_mse, r.val_mse);
        hist << buf;
    }
    if (!hist)
        throw Error(ErrorCode::io, "write to '" + out.history_path.string() + "' failed");

    log.info("best epoch " + std::to_string(out.model.best_epoch) + ": val MSE " + fmt("%.3e", out.best_val_mse) +
             ", band-noise test MSE " + fmt("%.3e", out.test_mse));
    log.info("model written to " + out.model_path.string());
    return out;
}

// ---------------------------------------------------------------------------
// eval

EvalMode parse_eval_mode(const std::string& text)
{
    if (text == "time")
        return EvalMode::time;
    if (text == "gain_freq")
        return EvalMode::gain_freq;
    if (text == "gain_power")
        return EvalMode::gain_power;
    if (text == "oip3")
        return EvalMode::oip3;
    throw Error(ErrorCode::config, "unknown eval mode '" + text + "' (expected time, gain_freq, gain_power or oip3)");
}

std::string to_string(EvalMode mode)
{
    switch (mode) {
    case EvalMode::time: return "time";
    case EvalMode::gain_freq: return "gain_freq";
    case EvalMode::gain_power: return "gain_power";
    case EvalMode::oip3: return "oip3";
    }
    return "unknown";
}

namespace {

constexpr const char* kMeasuredColor = "#1f77b4";
constexpr const char* kPredictedColor = "#d62728";
constexpr const char* kOracleColor = "#555555";

report::Plot curve_plot(const metrics::MetricCurve& c, const std::vector<double>& oracle, std::string title,
                        std::string x_label, std::string y_label)
{
    report::Plot p{std::move(title), std::move(x_label), std::move(y_label), {}};
    report::Series m{"measured", {}, {}, kMeasuredColor, false, true};
    report::Series n{"predicted", {}, {}, kPredictedColor, false, true};
    report::Series o{"analytic", {}, oracle, kOracleColor, true, false};
    for (const auto& pt : c.points) {
        m.x.push_back(pt.x);
        m.y.push_back(pt.measured);
        n.x.push_back(pt.x);
        n.y.push_back(pt.predicted);
        o.x.push_back(pt.x);
    }
    p.series = {m, n, o};
    return p;
}

void emit_curve(const metrics::MetricCurve& c, const std::vector<double>& oracle, const fs::path& dir,
                const std::string& stem, const std::string& title, const std::string& x_label,
                const std::string& y_label, EvalResult& result)
{
    const fs::path csv = dir / (stem + ".csv");
    const fs::path svg = dir / (stem + ".svg");
    metrics::write_curve_csv(c, csv);
    report::write_svg(curve_plot(c, oracle, title, x_label, y_label), svg);
    result.files.push_back(csv);
    result.files.push_back(svg);
    result.curves.push_back(c);
}

std::vector<testbench::CapturePair> load_group(const testbench::Manifest& m, const std::string& group)
{
    std::vector<testbench::CapturePair> out;
    for (const auto& e : require_group(m, group))
        out.push_back(testbench::read_capture_csv(e.path));
    return out;
}

void max_deviation(Logger& log, const metrics::MetricCurve& c, const std::string& what)
{
    double worst = 0;
    for (const auto& p : c.points)
        if (p.measured_ok && p.predicted_ok)
            worst = std::max(worst, std::abs(p.predicted - p.measured));
    log.info(what + ": " + std::to_string(c.points.size()) + " points, max |predicted - measured| = " +
             fmt("%.3f", worst) + " dB");
}

void eval_time(const RunConfig& cfg, const nn::ModelArtifact& model, const testbench::Manifest& manifest,
               Logger& log, EvalResult& result)
{
    nn::Predictor pred(model);
    const fs::path dir = cfg.report_dir();
    const std::size_t start = model.arch.input_width - 1;
    const std::size_t n = cfg.plan.n_fft;
    const std::size_t overlay = std::min<std::size_t>(500, n);
    const auto& st = model.norm_stats;

    const fs::path summary_path = dir / "time_summary.csv";
    std::ofstream summary(summary_path, std::ios::binary);
    if (!summary)
        throw Error(ErrorCode::io, "cannot open '" + summary_path.string() + "' for writing");
    summary << "capture,f_lo_hz,f_hi_hz,lag,mse_normalized\n";

    const auto entries = require_group(manifest, "time_test");
    for (std::size_t c = 0; c < entries.size(); ++c) {
        const auto a = load_aligned(entries[c], cfg.data.max_lag);
        if (start + n > a.pair.size())
            throw Error(ErrorCode::config, "capture '" + entries[c].path.string() + "' is too short for a " +
                                               std::to_string(n) + "-point comparison");
        const Waveform predicted = pred.predict_sequence(a.pair.stimulus, n, start);
        const Waveform measured = a.pair.response.segment(start, n);

        char stem[32];
        std::snprintf(stem, sizeof stem, "time_%02zu", c);
        const fs::path residual_path = dir / (std::string(stem) + "_residual.csv");
        std::ofstream res(residual_path, std::ios::binary);
        if (!res)
            throw Error(ErrorCode::io, "cannot open '" + residual_path.string() + "' for writing");
        res << "n,measured_v,predicted_v,residual_v\n";
        double mse = 0;
        char buf[128];
        for (std::size_t k = 0; k < n; ++k) {
            const double m = measured.samples[k], p = predicted.samples[k];
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", start + k, m, p, p - m);
            res << buf;
            const double d = st.normalize_output(p) - st.normalize_output(m);
            mse += d * d;
        }
        mse /= static_cast<double>(n);
        if (!res)
            throw Error(ErrorCode::io, "write to '" + residual_path.string() + "' failed");

        const auto& meta = a.pair.meta;
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%ld,%.17g\n", c, meta.f1_hz, meta.f2_hz, a.lag, mse);
        summary << buf;

        report::Plot wave{"Band " + fmt("%.4g", meta.f1_hz) + "-" + fmt("%.4g", meta.f2_hz) + " Hz: first " +
                              std::to_string(overlay) + " points",
                          "sample", "volts", {}};
        report::Series ms{"measured", {}, {}, kMeasuredColor};
        report::Series ps{"predicted", {}, {}, kPredictedColor, true};
        for (std::size_t k = 0; k < overlay; ++k) {
            ms.x.push_back(static_cast<double>(start + k));
            ms.y.push_back(measured.samples[k]);
            ps.x.push_back(static_cast<double>(start + k));
            ps.y.push_back(predicted.samples[k]);
        }
        wave.series = {ms, ps};

        const auto sm = metrics::spectrum(measured, n);
        const auto sp = metrics::spectrum(predicted, n);
        report::Plot spec{"Spectrum of " + std::to_string(n) + " points", "frequency (Hz)", "amplitude (dBV)", {}};
        report::Series msp{"measured", {}, {}, kMeasuredColor};
        report::Series psp{"predicted", {}, {}, kPredictedColor, true};
        for (std::size_t k = 1; 2 * k < n; ++k) {
            msp.x.push_back(sm.bin_freqs_hz[k]);
            msp.y.push_back(20.0 * std::log10(std::max(sm.amplitude(k), 1e-12)));
            psp.x.push_back(sp.bin_freqs_hz[k]);
            psp.y.push_back(20.0 * std::log10(std::max(sp.amplitude(k), 1e-12)));
        }
        spec.series = {msp, psp};

        const fs::path wave_path = dir / (std::string(stem) + "_waveform.svg");
        const fs::path spec_path = dir / (std::string(stem) + "_spectrum.svg");
        report::write_svg(wave, wave_path);
        report::write_svg(spec, spec_path);
        result.files.insert(result.files.end(), {wave_path, spec_path, residual_path});
        log.info(std::string(stem) + ": band " + fmt("%.4g", meta.f1_hz) + "-" + fmt("%.4g", meta.f2_hz) +
                 " Hz, normalized MSE " + fmt("%.3e", mse));
    }
    if (!summary)
        throw Error(ErrorCode::io, "write to '" + summary_path.string() + "' failed");
    result.files.push_back(summary_path);
}

}  // namespace

EvalResult cmd_eval(const RunConfig& cfg, EvalMode mode, Logger& log)
{
    cfg.validate();
    if (!fs::exists(cfg.model_path()))
        throw Error(ErrorCode::io, "no model at '" + cfg.model_path().string() + "'; run 'train' first");
    const auto model = nn::load_model(cfg.model_path());
    const auto manifest = open_manifest(cfg);
    ensure_dir(cfg.report_dir());

    EvalResult result;
    if (mode == EvalMode::time) {
        eval_time(cfg, model, manifest, log, result);
        return result;
    }

    nn::Predictor pred(model);
    metrics::ModelResponse response(pred);
    const metrics::AnalysisWindow win{model.arch.input_width, cfg.plan.n_fft, cfg.plan.z_ohm};
    const double fs_hz = cfg.plan.sample_rate_hz;
    const fs::path dir = cfg.report_dir();

    if (mode == EvalMode::gain_freq) {
        const auto caps = load_group(manifest, "sine_sweep");
        const auto c = metrics::gain_frequency_curve(response, caps, win);
        std::vector<double> oracle;
        for (const auto& p : c.points)
            oracle.push_back(dutsim::analytic_tone_gain_db(cfg.dut, p.x, caps.front().meta.amplitude_v, fs_hz));
        emit_curve(c, oracle, dir, "gain_freq", "Gain vs frequency", "frequency (Hz)", "gain (dB)", result);
        max_deviation(log, c, "gain_freq");
    } else if (mode == EvalMode::gain_power) {
        for (std::size_t j = 0; j < cfg.plan.power_sweeps.size(); ++j) {
            const std::string group = "power_sweep_" + std::to_string(j);
            const auto caps = load_group(manifest, group);
            const auto c = metrics::gain_power_curve(response, caps, win);
            std::vector<double> oracle;
            for (const auto& p : c.points)
                oracle.push_back(dutsim::analytic_tone_gain_db(cfg.dut, caps.front().meta.f1_hz,
                                                               siggen::dbm_to_amplitude(p.x, cfg.plan.z_ohm), fs_hz));
            emit_curve(c, oracle, dir, "gain_power_" + std::to_string(j),
                       "Gain vs input power at " + fmt("%.4g", caps.front().meta.f1_hz) + " Hz",
                       "input power (dBm)", "gain (dB)", result);
            max_deviation(log, c, group);
        }
    } else {
        const auto caps = load_group(manifest, "dual_tone");
        const auto c = metrics::oip3_frequency_curve(response, caps, win);
        const auto analytic = dutsim::analytic_oip3_dbm(cfg.dut, 0.0, cfg.plan.z_ohm);
        std::vector<double> oracle(c.points.size(), analytic.value_or(std::nan("")));
        emit_curve(c, oracle, dir, "oip3", "OIP3 vs frequency", "center frequency (Hz)", "OIP3 (dBm)", result);
        for (const auto& p : c.points) {
            if (!p.measured_ok)
                log.warn("oip3 at " + fmt("%.6g", p.x) + " Hz: measured IM3 is below the noise floor");
            if (!p.predicted_ok)
                log.warn("oip3 at " + fmt("%.6g", p.x) + " Hz: predicted IM3 is below the noise floor");
        }
        if (c.unreliable_count() > 0)
            log.warn(std::to_string(c.unreliable_count()) + " of " + std::to_string(c.points.size()) +
                     " OIP3 points are unreliable and were written as nan");
        max_deviation(log, c, "oip3");
    }
    return result;
}

// ---------------------------------------------------------------------------
// gradcheck

GradCheckResult cmd_gradcheck(Logger& log, bool inject_batchnorm_fault)
{
    GradCheckResult out;
    const std::vector<std::pair<std::string, nn::ArchSpec>> nets = {
        {"residual", nn::ArchSpec::residual(8, 2, 12)},
        {"autoencoder", nn::ArchSpec::autoencoder({10, 6, 3, 6}, 12)},
    };
    nn::GradCheckOptions opt;
    opt.inject_batchnorm_fault = inject_batchnorm_fault;
    for (const auto& [name, arch] : nets) {
        auto r = nn::grad_check(arch, kGradCheckStep, opt);
        log.info(name + ": " + std::to_string(r.checked) + " parameters, max relative error " +
                 fmt("%.3e", r.max_rel_error) + " (" + r.worst_slice + ")");
        for (const auto& [slice, err] : r.per_slice)
            log.debug("  " + slice + ": " + fmt("%.3e", err));
        out.max_rel_error = std::max(out.max_rel_error, r.max_rel_error);
        out.reports.emplace_back(name, std::move(r));
    }
    out.passed = out.max_rel_error < kGradCheckTolerance;
    log.info(std::string(out.passed ? "PASS" : "FAIL") + ": max relative error " + fmt("%.3e", out.max_rel_error) +
             " (tolerance " + fmt("%.0e", kGradCheckTolerance) + ")");
    return out;
}

int exit_code_for(const Error& e)
{
    switch (e.code()) {
    case ErrorCode::config: return kExitConfig;
    case ErrorCode::io: return kExitIo;
    case ErrorCode::parse: return kExitParse;
    case ErrorCode::divergence: return kExitDivergence;
    case ErrorCode::metrology: return kExitMetrology;
    case ErrorCode::invalid_argument: return kExitConfig;
    }
    return kExitUnexpected;
}

}  // namespace rfmodel::cli
