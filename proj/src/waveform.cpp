#include "rfmodel/waveform.hpp"

#include "rfmodel/error.hpp"

#include <cmath>
#include <string>

namespace rfmodel {

Waveform Waveform::segment(std::size_t start, std::size_t n) const
{
    if (start + n > samples.size())
        fail("segment [" + std::to_string(start) + ", " + std::to_string(start + n) +
             ") exceeds waveform length " + std::to_string(samples.size()));
    Waveform out;
    out.sample_rate_hz = sample_rate_hz;
    out.samples.assign(samples.begin() + static_cast<std::ptrdiff_t>(start),
                       samples.begin() + static_cast<std::ptrdiff_t>(start + n));
    return out;
}

void validate(const Waveform& w)
{
    if (w.samples.empty())
        fail("waveform is empty");
    if (!(w.sample_rate_hz > 0.0) || !std::isfinite(w.sample_rate_hz))
        fail("waveform sample rate must be positive");
    for (std::size_t i = 0; i < w.samples.size(); ++i) {
        if (!std::isfinite(w.samples[i]))
            fail("waveform sample " + std::to_string(i) + " is not finite");
    }
}

}  // namespace rfmodel
