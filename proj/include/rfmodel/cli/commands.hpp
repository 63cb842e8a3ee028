#pragma once

#include "rfmodel/cli/config.hpp"
#include "rfmodel/error.hpp"
#include "rfmodel/metrics.hpp"

#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

namespace rfmodel::cli {

enum class LogLevel { quiet, info, debug };

/// Reads RFMODEL_LOG (quiet, info, debug); info when unset.
LogLevel log_level_from_env();

/// Console messages carry no timestamps so command output stays
/// reproducible. When a log file is attached every message is also appended
/// there with a UTC timestamp.
class Logger {
public:
    explicit Logger(LogLevel level = LogLevel::info, std::ostream* console = nullptr);

    void attach_file(const std::filesystem::path& path);
    void info(const std::string& msg);
    void debug(const std::string& msg);
    void warn(const std::string& msg);

private:
    void emit(const char* tag, const std::string& msg, bool to_console);

    LogLevel level_;
    std::ostream* console_;
    std::ofstream file_;
};

/// Exclusive lock on an output directory, released on destruction.
class DirLock {
public:
    explicit DirLock(const std::filesystem::path& dir);
    ~DirLock();
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::filesystem::path path_;
};

inline constexpr const char* kLockName = ".rfmodel.lock";
inline constexpr const char* kLogName = "rfmodel.log";

testbench::Manifest cmd_generate(const RunConfig& cfg, Logger& log);

struct TrainSummary {
    nn::ModelArtifact model;
    std::vector<long> train_lags;
    double best_val_mse = 0;
    double test_mse = 0;  // band-noise captures, normalized scale
    std::filesystem::path model_path;
    std::filesystem::path history_path;
};

TrainSummary cmd_train(const RunConfig& cfg, Logger& log);

enum class EvalMode { time, gain_freq, gain_power, oip3 };
EvalMode parse_eval_mode(const std::string& text);
std::string to_string(EvalMode mode);

struct EvalResult {
    std::vector<metrics::MetricCurve> curves;
    std::vector<std::filesystem::path> files;  // everything written
};

EvalResult cmd_eval(const RunConfig& cfg, EvalMode mode, Logger& log);

struct GradCheckResult {
    bool passed = false;
    double max_rel_error = 0;
    std::vector<std::pair<std::string, nn::GradCheckReport>> reports;
};

inline constexpr double kGradCheckTolerance = 1e-5;
inline constexpr double kGradCheckStep = 1e-5;

/// Small residual and autoencoder nets at 64-bit, central differences.
GradCheckResult cmd_gradcheck(Logger& log, bool inject_batchnorm_fault = false);

/// Maps an error to the process exit code.
int exit_code_for(const Error& e);

inline constexpr int kExitOk = 0;
inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitConfig = 3;
inline constexpr int kExitIo = 4;
inline constexpr int kExitParse = 5;
inline constexpr int kExitDivergence = 6;
inline constexpr int kExitMetrology = 7;
inline constexpr int kExitGradCheck = 8;

}  // namespace rfmodel::cli
