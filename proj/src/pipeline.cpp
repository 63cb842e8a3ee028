#include "rfmodel/pipeline.hpp"

#include "rfmodel/error.hpp"
#include "rfmodel/rng.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

namespace rfmodel::pipeline {

namespace fs = std::filesystem;

DelayEstimate estimate_delay(const Waveform& x, const Waveform& y, std::size_t max_lag)
{
    if (x.size() != y.size())
        fail("estimate_delay: waveforms differ in length");
    if (x.size() < 2 * max_lag || x.size() < 2)
        fail("estimate_delay: length must be at least 2 * max_lag");

    const auto n = static_cast<long>(x.size());
    const auto& xs = x.samples;
    const auto& ys = y.samples;
    auto correlate = [&](long tau) {
        const long lo = std::max(0L, -tau);
        const long hi = std::min(n, n - tau);
        double acc = 0.0;
        for (long i = lo; i < hi; ++i)
            acc += xs[static_cast<std::size_t>(i)] * ys[static_cast<std::size_t>(i + tau)];
        return acc;
    };

    DelayEstimate best;
    best.peak = correlate(0);
    double best_mag = std::abs(best.peak);
    const auto lag_limit = static_cast<long>(max_lag);
    for (long d = 1; d <= lag_limit; ++d) {
        for (const long tau : {d, -d}) {
            const double r = correlate(tau);
            if (std::abs(r) > best_mag) {
                best_mag = std::abs(r);
                best.peak = r;
                best.lag = tau;
            }
        }
    }
    if (!(best_mag > 0.0))
        fail("estimate_delay: correlation is identically zero (all-zero input)");
    best.sign = best.peak < 0 ? -1 : 1;
    return best;
}

testbench::CapturePair align(const testbench::CapturePair& pair, long lag)
{
    const auto n = static_cast<long>(pair.size());
    if (std::abs(lag) >= n)
        fail("align: |lag| leaves no overlap");
    const auto len = static_cast<std::size_t>(n - std::abs(lag));
    const std::size_t x0 = lag < 0 ? static_cast<std::size_t>(-lag) : 0;
    const std::size_t y0 = lag > 0 ? static_cast<std::size_t>(lag) : 0;

    testbench::CapturePair out;
    out.meta = pair.meta;
    out.stimulus = pair.stimulus.segment(x0, len);
    out.response = pair.response.segment(y0, len);
    return out;
}

NormStats fit_norm_stats(std::span<const testbench::CapturePair> training_pairs)
{
    if (training_pairs.empty())
        fail("fit_norm_stats: no training captures");
    constexpr double inf = std::numeric_limits<double>::infinity();
    NormStats s{inf, -inf, inf, -inf};
    for (const auto& p : training_pairs) {
        for (double v : p.stimulus.samples) {
            s.in_min = std::min(s.in_min, v);
            s.in_max = std::max(s.in_max, v);
        }
        for (double v : p.response.samples) {
            s.out_min = std::min(s.out_min, v);
            s.out_max = std::max(s.out_max, v);
        }
    }
    if (!(s.in_max > s.in_min))
        fail("fit_norm_stats: degenerate range, stimulus channel is constant");
    if (!(s.out_max > s.out_min))
        fail("fit_norm_stats: degenerate range, response channel is constant");
    return s;
}

void WindowedDataset::append(const WindowedDataset& other)
{
    if (other.window != window)
        fail("WindowedDataset::append: window widths differ");
    if (targets.empty() && sources.empty())
        stats = other.stats;
    else if (!(other.stats == stats))
        fail("WindowedDataset::append: normalization statistics differ");
    const auto offset = static_cast<std::uint32_t>(sources.size());
    inputs.insert(inputs.end(), other.inputs.begin(), other.inputs.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
    positions.insert(positions.end(), other.positions.begin(), other.positions.end());
    for (auto s : other.source)
        source.push_back(s + offset);
    sources.insert(sources.end(), other.sources.begin(), other.sources.end());
}

WindowedDataset extract_windows(const testbench::CapturePair& pair, const NormStats& stats, std::size_t window,
                                std::size_t count, std::uint64_t seed, const std::string& source_id)
{
    if (window == 0)
        fail("extract_windows: window must be positive");
    const std::size_t len = pair.size();
    if (len < window + 1)
        fail("extract_windows: insufficient length, capture has " + std::to_string(len) +
             " samples but window needs " + std::to_string(window + 1));
    const std::size_t usable = len - window + 1;
    if (count > usable)
        fail("extract_windows: insufficient length, " + std::to_string(count) + " windows requested but only " +
             std::to_string(usable) + " positions exist");

    // Partial Fisher-Yates over the usable index range.
    std::vector<std::size_t> idx(usable);
    std::iota(idx.begin(), idx.end(), window - 1);
    Rng rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(usable - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());

    WindowedDataset ds;
    ds.window = window;
    ds.stats = stats;
    ds.sources.push_back(source_id);
    ds.inputs.resize(count * window);
    ds.targets.resize(count);
    ds.source.assign(count, 0);
    ds.positions = idx;
    const auto& x = pair.stimulus.samples;
    const auto& y = pair.response.samples;
    for (std::size_t r = 0; r < count; ++r) {
        const std::size_t n = idx[r];
        double* dst = ds.inputs.data() + r * window;
        for (std::size_t j = 0; j < window; ++j)
            dst[j] = stats.normalize_input(x[n + 1 - window + j]);
        ds.targets[r] = stats.normalize_output(y[n]);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Binary I/O

namespace {

static_assert(std::endian::native == std::endian::little, "dataset I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::ifstream& in, const fs::path& path)
{
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in)
        throw Error(ErrorCode::parse, "'" + path.string() + "': truncated dataset file");
    return v;
}

}  // namespace

void write_dataset(const WindowedDataset& ds, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
    out.write("RFWD", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.window));
    put<std::uint64_t>(out, ds.size());
    for (double v : {ds.stats.in_min, ds.stats.in_max, ds.stats.out_min, ds.stats.out_max})
        put<double>(out, v);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.sources.size()));
    for (const auto& s : ds.sources) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
        out.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    for (std::size_t r = 0; r < ds.size(); ++r) {
        out.write(reinterpret_cast<const char*>(ds.inputs.data() + r * ds.window),
                  static_cast<std::streamsize>(ds.window * sizeof(double)));
        put<double>(out, ds.targets[r]);
    }
    for (auto s : ds.source)
        put<std::uint32_t>(out, s);
    if (!out)
        throw Error(ErrorCode::io, "write to '" + path.string() + "' failed");
}

WindowedDataset read_dataset(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "RFWD", 4) != 0)
        throw Error(ErrorCode::parse, "'" + path.string() + "': not a windowed dataset");
    if (get<std::uint32_t>(in, path) != 1)
        throw Error(ErrorCode::parse, "'" + path.string() + "': unsupported dataset version");
    WindowedDataset ds;
    ds.window = get<std::uint32_t>(in, path);
    const auto rows = get<std::uint64_t>(in, path);
    ds.stats.in_min = get<double>(in, path);
    ds.stats.in_max = get<double>(in, path);
    ds.stats.out_min = get<double>(in, path);
    ds.stats.out_max = get<double>(in, path);
    const auto n_sources = get<std::uint32_t>(in, path);
    for (std::uint32_t i = 0; i < n_sources; ++i) {
        const auto len = get<std::uint32_t>(in, path);
        std::string s(len, '\0');
        in.read(s.data(), len);
        ds.sources.push_back(std::move(s));
    }
    ds.inputs.resize(rows * ds.window);
    ds.targets.resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        in.read(reinterpret_cast<char*>(ds.inputs.data() + r * ds.window),
                static_cast<std::streamsize>(ds.window * sizeof(double)));
        ds.targets[r] = get<double>(in, path);
    }
    ds.source.resize(rows);
    for (auto& s : ds.source)
        s = get<std::uint32_t>(in, path);
    return ds;
}

}  // namespace rfmodel::pipeline
