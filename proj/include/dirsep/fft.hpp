// Iterative radix-2 FFT for power-of-two sizes. Enough for the STFT; frame
// configs round the transform size up to a power of two.
#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "dirsep/errors.hpp"

namespace dirsep::detail {

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline std::size_t next_power_of_two(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place forward FFT when invert is false, unscaled inverse when true.
// The caller divides by n after an inverse transform.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool invert) {
    const std::size_t n = a.size();
    if (!is_power_of_two(n)) throw domain_error("fft: size must be a power of two");
    if (n <= 1) return;

    for (std::size_t i = 1, j = 0; i < n; ++i) {  // bit-reversal permutation
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }

    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (invert ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const std::complex<double> u = a[i + j];
                const std::complex<double> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

}  // namespace dirsep::detail
