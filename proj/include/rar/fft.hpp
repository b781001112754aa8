#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/tensor.hpp"

namespace rar {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

namespace detail {

// In-place iterative radix-2 FFT. sign = -1: forward (e^{-2pi i}),
// sign = +1: inverse kernel without the 1/N factor.
inline void fft_1d(complex_t* a, int n, int stride, int sign,
                   std::vector<complex_t>& scratch) {
  if (n == 1) return;
  scratch.resize(n);
  for (int i = 0; i < n; ++i) scratch[i] = a[static_cast<std::size_t>(i) * stride];

  // Bit-reversal permutation.
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(scratch[i], scratch[j]);
  }

  for (int len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / len;
    const complex_t wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      complex_t w(1.0, 0.0);
      for (int k = 0; k < len / 2; ++k) {
        complex_t u = scratch[i + k];
        complex_t v = scratch[i + k + len / 2] * w;
        scratch[i + k] = u + v;
        scratch[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  for (int i = 0; i < n; ++i) a[static_cast<std::size_t>(i) * stride] = scratch[i];
}

inline void fft_2d_inplace(Spectrum& s, int sign) {
  const int w = s.width(), h = s.height();
  std::vector<complex_t> scratch;
  for (int ch = 0; ch < s.channels(); ++ch) {
    complex_t* plane = &s.at(0, 0, ch);
    for (int y = 0; y < h; ++y) fft_1d(plane + static_cast<std::size_t>(y) * w, w, 1, sign, scratch);
    for (int x = 0; x < w; ++x) fft_1d(plane + x, h, w, sign, scratch);
  }
}

inline void require_fft_dims(int w, int h, const char* where) {
  if (!is_power_of_two(w) || !is_power_of_two(h) || w < 2 || h < 2)
    throw DimensionError(std::string(where) +
                         ": dimensions must be powers of two >= 2, got " +
                         std::to_string(w) + "x" + std::to_string(h));
}

}  // namespace detail

// Unnormalized forward 2-D DFT per channel, e^{-2pi i} convention.
inline Spectrum fft2d(const Tensor3& t) {
  detail::require_fft_dims(t.width(), t.height(), "fft2d");
  Spectrum s(t.width(), t.height(), t.channels());
  for (std::size_t i = 0; i < t.size(); ++i) s[i] = complex_t(t[i], 0.0);
  detail::fft_2d_inplace(s, -1);
  return s;
}

inline Spectrum fft2d(const Spectrum& in) {
  detail::require_fft_dims(in.width(), in.height(), "fft2d");
  Spectrum s = in;
  detail::fft_2d_inplace(s, -1);
  return s;
}

// Full complex inverse transform carrying the 1/(WH) factor.
inline Spectrum ifft2d_complex(const Spectrum& in) {
  detail::require_fft_dims(in.width(), in.height(), "ifft2d");
  Spectrum s = in;
  detail::fft_2d_inplace(s, +1);
  const real_t scale = 1.0 / (static_cast<real_t>(in.width()) * in.height());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] *= scale;
  return s;
}

// Real part of the inverse transform. For Hermitian-symmetric inputs the
// imaginary residue is tiny; callers that rely on that assert it via
// ifft2d_checked.
inline Tensor3 ifft2d(const Spectrum& in) {
  Spectrum s = ifft2d_complex(in);
  Tensor3 out(in.width(), in.height(), in.channels());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i].real();
  return out;
}

// As ifft2d, but also reports the largest imaginary residue.
inline Tensor3 ifft2d_checked(const Spectrum& in, real_t* max_imag) {
  Spectrum s = ifft2d_complex(in);
  Tensor3 out(in.width(), in.height(), in.channels());
  real_t mi = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    out[i] = s[i].real();
    mi = std::max(mi, std::abs(s[i].imag()));
  }
  if (max_imag) *max_imag = mi;
  return out;
}

}  // namespace rar
