#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/fft.hpp"
#include "rar/image.hpp"
#include "rar/signal.hpp"
#include "rar/tensor.hpp"

namespace rar {

// Target template plus k context templates sharing its shape. offsets
// records each context's circular shift so adjoints can undo it.
struct ContextSet {
  Tensor3 target;
  std::vector<Tensor3> contexts;
  std::vector<std::pair<int, int>> offsets;
};

// Contexts are taken at the four axial offsets (+-target_w, 0), (0, +-target_h)
// from the target center, with circular wrap, each windowed like the target.
// `features` is the unwindowed feature plane centered on the target.
inline ContextSet make_context_set(const Tensor3& features, const Rect& target_rect_cells,
                                   int k, bool window = true) {
  if (k != 0 && k != 4)
    throw ParameterError("make_context_set: k must be 0 or 4");
  Tensor3 win = window ? hann_window(features.width(), features.height())
                       : Tensor3(features.width(), features.height(), 1, 1.0);
  ContextSet cs;
  cs.target = apply_window(features, win);
  if (k == 4) {
    const int dx = std::max(1, static_cast<int>(std::lround(target_rect_cells.w)));
    const int dy = std::max(1, static_cast<int>(std::lround(target_rect_cells.h)));
    const int offsets[4][2] = {{dx, 0}, {-dx, 0}, {0, dy}, {0, -dy}};
    for (auto& off : offsets) {
      cs.contexts.push_back(apply_window(circshift(features, off[0], off[1]), win));
      cs.offsets.emplace_back(off[0], off[1]);
    }
  }
  return cs;
}

namespace detail {

// Solve A v = b for a small complex matrix by partial-pivoting LU.
// A is n x n row-major and is destroyed.
inline void solve_small_complex(std::vector<complex_t>& A, std::vector<complex_t>& b,
                                int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    real_t best = std::abs(A[static_cast<std::size_t>(col) * n + col]);
    for (int r = col + 1; r < n; ++r) {
      const real_t v = std::abs(A[static_cast<std::size_t>(r) * n + col]);
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (piv != col) {
      for (int j = 0; j < n; ++j)
        std::swap(A[static_cast<std::size_t>(col) * n + j],
                  A[static_cast<std::size_t>(piv) * n + j]);
      std::swap(b[col], b[piv]);
    }
    const complex_t d = A[static_cast<std::size_t>(col) * n + col];
    for (int r = col + 1; r < n; ++r) {
      const complex_t f = A[static_cast<std::size_t>(r) * n + col] / d;
      if (f == complex_t(0.0, 0.0)) continue;
      for (int j = col; j < n; ++j)
        A[static_cast<std::size_t>(r) * n + j] -= f * A[static_cast<std::size_t>(col) * n + j];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    complex_t s = b[r];
    for (int j = r + 1; j < n; ++j) s -= A[static_cast<std::size_t>(r) * n + j] * b[j];
    b[r] = s / A[static_cast<std::size_t>(r) * n + r];
  }
}

}  // namespace detail

// Fourier-domain filter accumulators. num holds per-channel numerators
// conj(z0_hat) .* y_hat. den holds, per frequency bin, the C x C Hermitian
// Gram matrix conj(z0) z0^T + lambda2 * sum_i conj(zi) zi^T + lambda1 I,
// stored as C*C planes indexed (p * C + q). For C = 1 this degenerates to
// the familiar scalar denominator plane; keeping the full matrix makes the
// closed-form solution exact for multi-channel features with context
// patches, which the scalar form is not.
class FilterModel {
 public:
  Spectrum num;
  Spectrum den;  // channels = C * C
  real_t lambda1 = 1e-4;
  real_t lambda2 = 0.1;
  real_t eta = 0.013;
  long frame_count = 0;

  FilterModel() = default;
  FilterModel(int w, int h, int c, real_t l1, real_t l2, real_t update_rate)
      : num(w, h, c), den(w, h, c * c), lambda1(l1), lambda2(l2), eta(update_rate) {
    if (l1 <= 0.0) throw ParameterError("FilterModel: lambda1 must be > 0");
    if (l2 < 0.0) throw ParameterError("FilterModel: lambda2 must be >= 0");
    if (update_rate < 0.0 || update_rate > 1.0)
      throw ParameterError("FilterModel: eta must be in [0,1]");
  }

  int width() const { return num.width(); }
  int height() const { return num.height(); }
  int channels() const { return num.channels(); }
  bool initialized() const { return num.size() > 0; }
};

// Single-frame accumulators for the closed-form contextual filter.
inline void train_filter_frame(const ContextSet& cs, const Spectrum& label_hat,
                               real_t lambda1, real_t lambda2, Spectrum* num_t,
                               Spectrum* den_t) {
  if (lambda1 <= 0.0) throw ParameterError("train_filter_frame: lambda1 must be > 0");
  if (lambda2 < 0.0) throw ParameterError("train_filter_frame: lambda2 must be >= 0");
  if (label_hat.width() != cs.target.width() || label_hat.height() != cs.target.height() ||
      label_hat.channels() != 1)
    throw DimensionError("train_filter_frame: label must be WxHx1 matching features");
  for (const Tensor3& ctx : cs.contexts)
    require_same_shape(cs.target, ctx, "train_filter_frame");

  const int c = cs.target.channels();
  const std::size_t plane = cs.target.plane_size();
  Spectrum z0 = fft2d(cs.target);
  std::vector<Spectrum> zi;
  zi.reserve(cs.contexts.size());
  for (const Tensor3& ctx : cs.contexts) zi.push_back(fft2d(ctx));

  *num_t = Spectrum(cs.target.width(), cs.target.height(), c);
  *den_t = Spectrum(cs.target.width(), cs.target.height(), c * c);
  for (std::size_t b = 0; b < plane; ++b) {
    const complex_t y = label_hat[b];
    for (int p = 0; p < c; ++p) {
      const complex_t zp = z0[static_cast<std::size_t>(p) * plane + b];
      (*num_t)[static_cast<std::size_t>(p) * plane + b] = std::conj(zp) * y;
      for (int q = 0; q < c; ++q) {
        const complex_t zq = z0[static_cast<std::size_t>(q) * plane + b];
        complex_t m = std::conj(zp) * zq;
        for (const Spectrum& zctx : zi)
          m += lambda2 * std::conj(zctx[static_cast<std::size_t>(p) * plane + b]) *
               zctx[static_cast<std::size_t>(q) * plane + b];
        if (p == q) m += lambda1;
        (*den_t)[(static_cast<std::size_t>(p) * c + q) * plane + b] = m;
      }
    }
  }
}

// Exponential temporal weighting: beta_t proportional to eta * (1-eta)^(T-t).
inline void update_filter(FilterModel& model, const Spectrum& num_t,
                          const Spectrum& den_t, real_t eta) {
  if (eta < 0.0 || eta > 1.0)
    throw ParameterError("update_filter: eta must be in [0,1]");
  if (!model.num.same_shape(num_t) || !model.den.same_shape(den_t))
    throw DimensionError("update_filter: accumulator shape mismatch");
  for (std::size_t i = 0; i < model.num.size(); ++i)
    model.num[i] = (1.0 - eta) * model.num[i] + eta * num_t[i];
  for (std::size_t i = 0; i < model.den.size(); ++i)
    model.den[i] = (1.0 - eta) * model.den[i] + eta * den_t[i];
  model.frame_count += 1;
}

// Per-bin filter solution v = den^{-1} num (v plays the role of the
// conjugated Fourier filter: g_hat = sum_ch x_hat .* v).
inline Spectrum solve_filter(const FilterModel& model) {
  const int c = model.channels();
  const std::size_t plane = model.num.plane_size();
  Spectrum v(model.width(), model.height(), c);
  if (c == 1) {
    for (std::size_t b = 0; b < plane; ++b) v[b] = model.num[b] / model.den[b];
    return v;
  }
  std::vector<complex_t> A(static_cast<std::size_t>(c) * c);
  std::vector<complex_t> rhs(c);
  for (std::size_t b = 0; b < plane; ++b) {
    for (int p = 0; p < c; ++p) {
      rhs[p] = model.num[static_cast<std::size_t>(p) * plane + b];
      for (int q = 0; q < c; ++q)
        A[static_cast<std::size_t>(p) * c + q] =
            model.den[(static_cast<std::size_t>(p) * c + q) * plane + b];
    }
    detail::solve_small_complex(A, rhs, c);
    for (int p = 0; p < c; ++p) v[static_cast<std::size_t>(p) * plane + b] = rhs[p];
  }
  return v;
}

struct ResponseMap {
  Tensor3 plane;  // W x H x 1
  real_t peak_value = 0.0;
  int peak_x = 0, peak_y = 0;
  real_t sub_dx = 0.0, sub_dy = 0.0;  // in [-0.5, 0.5]
  real_t max_imag = 0.0;              // imaginary residue of the inverse FFT
};

namespace detail {

inline real_t parabola_offset(real_t left, real_t mid, real_t right) {
  const real_t denom = left - 2.0 * mid + right;
  if (std::abs(denom) < 1e-12) return 0.0;
  real_t d = 0.5 * (left - right) / denom;
  return std::clamp(d, -0.5, 0.5);
}

inline void find_peak(ResponseMap& r) {
  const Tensor3& g = r.plane;
  const int w = g.width(), h = g.height();
  real_t best = g.at(0, 0, 0);
  int bx = 0, by = 0;
  auto disp_mag2 = [&](int x, int y) {
    const int dx = x <= w / 2 ? x : x - w;
    const int dy = y <= h / 2 ? y : y - h;
    return dx * dx + dy * dy;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const real_t v = g.at(x, y, 0);
      if (v > best ||
          (v == best && disp_mag2(x, y) < disp_mag2(bx, by))) {
        best = v;
        bx = x;
        by = y;
      }
    }
  r.peak_value = best;
  r.peak_x = bx;
  r.peak_y = by;
  const real_t lx = g.at((bx - 1 + w) % w, by, 0);
  const real_t rx = g.at((bx + 1) % w, by, 0);
  const real_t uy = g.at(bx, (by - 1 + h) % h, 0);
  const real_t dy = g.at(bx, (by + 1) % h, 0);
  r.sub_dx = parabola_offset(lx, best, rx);
  r.sub_dy = parabola_offset(uy, best, dy);
}

}  // namespace detail

// g = ifft( sum_ch v[ch] .* x_hat[ch] ) with v from the accumulated model.
inline ResponseMap response(const FilterModel& model, const Tensor3& x_features) {
  if (x_features.width() != model.width() || x_features.height() != model.height() ||
      x_features.channels() != model.channels())
    throw DimensionError("response: probe shape does not match model");
  Spectrum xs = fft2d(x_features);
  Spectrum v = solve_filter(model);
  Spectrum g_hat(model.width(), model.height(), 1);
  const std::size_t plane = xs.plane_size();
  for (int ch = 0; ch < model.channels(); ++ch)
    for (std::size_t b = 0; b < plane; ++b)
      g_hat[b] += xs[static_cast<std::size_t>(ch) * plane + b] *
                  v[static_cast<std::size_t>(ch) * plane + b];
  ResponseMap r;
  r.plane = ifft2d_checked(g_hat, &r.max_imag);
  detail::find_peak(r);
  return r;
}

// Displacement (feature cells) from the response origin to the peak, with
// circular wrap and subpixel refinement; confidence is the peak value.
inline void locate(const ResponseMap& r, real_t* dx, real_t* dy, real_t* confidence) {
  const int w = r.plane.width(), h = r.plane.height();
  const int ix = r.peak_x <= w / 2 ? r.peak_x : r.peak_x - w;
  const int iy = r.peak_y <= h / 2 ? r.peak_y : r.peak_y - h;
  if (dx) *dx = ix + r.sub_dx;
  if (dy) *dy = iy + r.sub_dy;
  if (confidence) *confidence = r.peak_value;
}

// Spatial-domain L2 norm of the filter (via Parseval); used to study
// regularization strength.
inline real_t filter_l2_norm(const FilterModel& model) {
  Spectrum v = solve_filter(model);
  real_t s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += std::norm(v[i]);
  return std::sqrt(s / static_cast<real_t>(v.plane_size()));
}

}  // namespace rar
