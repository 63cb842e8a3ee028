#pragma once

#include <complex>
#include <span>
#include <vector>

namespace rfmodel::fft {

using Complex = std::complex<double>;

/// Unnormalized forward DFT: X[k] = sum_n x[n] exp(-2*pi*i*k*n/N). Any N >= 1.
std::vector<Complex> forward(std::span<const Complex> x);
std::vector<Complex> forward(std::span<const double> x);

/// Inverse DFT including the 1/N factor, so inverse(forward(x)) == x.
std::vector<Complex> inverse(std::span<const Complex> X);

}  // namespace rfmodel::fft
