#pragma once

#include <cmath>

#include "rar/error.hpp"
#include "rar/tensor.hpp"

namespace rar {

// Separable Hann window, win(x, y) = hx(x) * hy(y) with
// hx(n) = 0.5 * (1 - cos(2 pi n / (w - 1))). Corners are exactly zero.
inline Tensor3 hann_window(int w, int h) {
  if (w < 2 || h < 2) throw ParameterError("hann_window: size must be >= 2");
  Tensor3 out(w, h, 1);
  auto axis = [](int n, int len) {
    return 0.5 * (1.0 - std::cos(2.0 * M_PI * n / (len - 1)));
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.at(x, y, 0) = axis(x, w) * axis(y, h);
  return out;
}

// Gaussian label y(p) = exp(-||p - center||^2 / (2 sigma^2)) with circular
// (wrapped) distance, so the peak sits exactly at `center` and equals 1.
inline Tensor3 gaussian_label(int w, int h, real_t sigma, int cx, int cy) {
  if (sigma <= 0.0) throw ParameterError("gaussian_label: sigma must be > 0");
  Tensor3 out(w, h, 1);
  auto circ = [](int d, int n) {
    int m = ((d % n) + n) % n;
    return m > n / 2 ? m - n : m;
  };
  const real_t inv = 1.0 / (2.0 * sigma * sigma);
  for (int y = 0; y < h; ++y) {
    const real_t dy = circ(y - cy, h);
    for (int x = 0; x < w; ++x) {
      const real_t dx = circ(x - cx, w);
      out.at(x, y, 0) = std::exp(-(dx * dx + dy * dy) * inv);
    }
  }
  return out;
}

}  // namespace rar
