#pragma once

#include "rfmodel/testbench.hpp"
#include "rfmodel/waveform.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

/// Capture preprocessing: delay compensation, min-max normalization and
/// sliding-window extraction.
namespace rfmodel::pipeline {

inline constexpr std::size_t kDefaultMaxLag = 512;
inline constexpr std::size_t kDefaultWindow = 1024;
inline constexpr std::size_t kDefaultWindowCount = 2048;

struct DelayEstimate {
    long lag = 0;      // y is x delayed by `lag` samples
    int sign = 1;      // -1 for an inverting device
    double peak = 0;   // R_xy at the chosen lag
};

/// Cross-correlation R_xy(tau) = sum_n x[n] y[n + tau] over the finite,
/// zero-padded records, searched on [-max_lag, max_lag]. Picks the largest
/// |R|; on exact ties the smallest |tau| wins (positive before negative).
DelayEstimate estimate_delay(const Waveform& x, const Waveform& y, std::size_t max_lag = kDefaultMaxLag);

/// Shifts the response back by `lag` and trims both channels to their
/// overlap, so the result has length - |lag| samples.
testbench::CapturePair align(const testbench::CapturePair& pair, long lag);

/// Per-channel min/max used for the [0, 1] scaling.
struct NormStats {
    double in_min = 0;
    double in_max = 1;
    double out_min = 0;
    double out_max = 1;

    double normalize_input(double v) const { return (v - in_min) / (in_max - in_min); }
    double normalize_output(double v) const { return (v - out_min) / (out_max - out_min); }
    double denormalize_input(double v) const { return in_min + v * (in_max - in_min); }
    double denormalize_output(double v) const { return out_min + v * (out_max - out_min); }

    bool operator==(const NormStats&) const = default;
};

/// Global min/max over all captures, per channel. Throws when a channel is
/// constant.
NormStats fit_norm_stats(std::span<const testbench::CapturePair> training_pairs);

/// Windowed regression examples.
///
/// Sample i uses inputs stimulus[n - W + 1 .. n] (the current sample is the
/// last element) and target response[n], both normalized with the training
/// statistics. Values are not clamped, so data outside the training range
/// maps outside [0, 1].
struct WindowedDataset {
    std::size_t window = kDefaultWindow;
    NormStats stats;
    std::vector<double> inputs;         // count x window, row-major
    std::vector<double> targets;        // count
    std::vector<std::uint32_t> source;  // index into sources, per row
    std::vector<std::size_t> positions; // index n of each target in its capture
    std::vector<std::string> sources;   // capture identifiers

    std::size_t size() const noexcept { return targets.size(); }
    std::span<const double> row(std::size_t i) const { return {inputs.data() + i * window, window}; }

    void append(const WindowedDataset& other);
};

/// Draws `count` distinct target indices n in [window - 1, length - 1]
/// (returned in ascending order) and builds the dataset.
WindowedDataset extract_windows(const testbench::CapturePair& pair, const NormStats& stats,
                                std::size_t window, std::size_t count, std::uint64_t seed,
                                const std::string& source_id = {});

/// Binary layout, little-endian:
///   "RFWD" u32 version=1 | u32 window | u64 rows
///   f64 in_min, in_max, out_min, out_max | u32 n_sources
///   n_sources x (u32 len, bytes)
///   rows x (window f64 inputs, f64 target)
///   rows x u32 source index
void write_dataset(const WindowedDataset& ds, const std::filesystem::path& path);
WindowedDataset read_dataset(const std::filesystem::path& path);

}  // namespace rfmodel::pipeline
