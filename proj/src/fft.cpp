#include "rfmodel/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <mutex>

namespace rfmodel::fft {

namespace {

// The FFTW planner is not thread-safe; execution is.
std::mutex planner_mutex;

std::vector<Complex> transform(std::span<const Complex> in, int sign)
{
    const int n = static_cast<int>(in.size());
    std::vector<Complex> out(in.size());
    if (n == 0)
        return out;

    auto* buf_in = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * in.size()));
    auto* buf_out = reinterpret_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * in.size()));
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex);
        // FFTW_ESTIMATE picks the algorithm without timing runs, so the
        // result is bit-reproducible between runs.
        plan = fftw_plan_dft_1d(n, buf_in, buf_out, sign, FFTW_ESTIMATE);
    }
    std::copy(in.begin(), in.end(), reinterpret_cast<Complex*>(buf_in));
    fftw_execute(plan);
    std::copy_n(reinterpret_cast<Complex*>(buf_out), in.size(), out.begin());
    {
        std::lock_guard lock(planner_mutex);
        fftw_destroy_plan(plan);
    }
    fftw_free(buf_in);
    fftw_free(buf_out);
    return out;
}

}  // namespace

std::vector<Complex> forward(std::span<const Complex> x) { return transform(x, FFTW_FORWARD); }

std::vector<Complex> forward(std::span<const double> x)
{
    std::vector<Complex> c(x.begin(), x.end());
    return transform(c, FFTW_FORWARD);
}

std::vector<Complex> inverse(std::span<const Complex> X)
{
    auto out = transform(X, FFTW_BACKWARD);
    const double scale = 1.0 / static_cast<double>(X.size());
    for (auto& v : out)
        v *= scale;
    return out;
}

}  // namespace rfmodel::fft
