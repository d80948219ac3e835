#pragma once

#include <complex>
#include <vector>

namespace docsr {

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// 2-D FFT over a row-major h x w grid (both powers of two).
void fft2d(std::vector<std::complex<double>>& data, int h, int w, bool inverse);

int next_pow2(int v);

}  // namespace docsr
