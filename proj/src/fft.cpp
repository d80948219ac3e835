#include "docsr/fft.hpp"

#include <cmath>

#include "docsr/errors.hpp"

namespace docsr {

int next_pow2(int v) {
    int p = 1;
    while (p < v) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ContractError("fft: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        double ang = 2.0 * M_PI / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse)
        for (auto& x : a) x /= static_cast<double>(n);
}

void fft2d(std::vector<std::complex<double>>& data, int h, int w, bool inverse) {
    if (static_cast<size_t>(h) * w != data.size()) throw ContractError("fft2d: size mismatch");
    std::vector<std::complex<double>> line;
    line.resize(static_cast<size_t>(w));
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) line[static_cast<size_t>(x)] = data[static_cast<size_t>(y) * w + x];
        fft_inplace(line, inverse);
        for (int x = 0; x < w; ++x) data[static_cast<size_t>(y) * w + x] = line[static_cast<size_t>(x)];
    }
    line.resize(static_cast<size_t>(h));
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) line[static_cast<size_t>(y)] = data[static_cast<size_t>(y) * w + x];
        fft_inplace(line, inverse);
        for (int y = 0; y < h; ++y) data[static_cast<size_t>(y) * w + x] = line[static_cast<size_t>(y)];
    }
}

}  // namespace docsr
