#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace rfmodel {

/// Uniformly sampled real signal in volts.
struct Waveform {
    std::vector<double> samples;
    double sample_rate_hz = 1.0;

    std::size_t size() const noexcept { return samples.size(); }
    bool empty() const noexcept { return samples.empty(); }
    std::span<const double> view() const noexcept { return samples; }

    /// Copy of samples [start, start + n).
    Waveform segment(std::size_t start, std::size_t n) const;

    bool operator==(const Waveform&) const = default;
};

/// Throws unless the waveform is non-empty, has fs > 0 and only finite samples.
void validate(const Waveform& w);

}  // namespace rfmodel
