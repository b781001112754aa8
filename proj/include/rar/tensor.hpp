#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "rar/error.hpp"

namespace rar {

using real_t = double;
using complex_t = std::complex<double>;

// W x H x C real tensor, row-major within a channel plane, channel-major
// overall: data[(ch * H + y) * W + x]. All reductions over it iterate in
// this fixed order so results are bit-reproducible across runs.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int width, int height, int channels, real_t fill = 0.0)
      : w_(width), h_(height), c_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0)
      throw DimensionError("Tensor3: dimensions must be positive, got " +
                           std::to_string(width) + "x" + std::to_string(height) +
                           "x" + std::to_string(channels));
    data_.assign(static_cast<std::size_t>(w_) * h_ * c_, fill);
  }

  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(w_) * h_; }

  real_t& at(int x, int y, int ch) {
    return data_[(static_cast<std::size_t>(ch) * h_ + y) * w_ + x];
  }
  real_t at(int x, int y, int ch) const {
    return data_[(static_cast<std::size_t>(ch) * h_ + y) * w_ + x];
  }
  real_t& operator[](std::size_t i) { return data_[i]; }
  real_t operator[](std::size_t i) const { return data_[i]; }

  std::vector<real_t>& data() { return data_; }
  const std::vector<real_t>& data() const { return data_; }

  bool same_shape(const Tensor3& o) const {
    return w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
  }

  bool all_finite() const {
    for (real_t v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  real_t max_abs() const {
    real_t m = 0.0;
    for (real_t v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  real_t sum() const {
    real_t s = 0.0;
    for (real_t v : data_) s += v;
    return s;
  }

  real_t norm2() const {
    real_t s = 0.0;
    for (real_t v : data_) s += v * v;
    return std::sqrt(s);
  }

 private:
  int w_ = 0, h_ = 0, c_ = 0;
  std::vector<real_t> data_;
};

// Complex companion of Tensor3, same layout.
class Spectrum {
 public:
  Spectrum() = default;
  Spectrum(int width, int height, int channels)
      : w_(width), h_(height), c_(channels) {
    if (width <= 0 || height <= 0 || channels <= 0)
      throw DimensionError("Spectrum: dimensions must be positive");
    data_.assign(static_cast<std::size_t>(w_) * h_ * c_, complex_t(0.0, 0.0));
  }

  int width() const { return w_; }
  int height() const { return h_; }
  int channels() const { return c_; }
  std::size_t size() const { return data_.size(); }
  std::size_t plane_size() const { return static_cast<std::size_t>(w_) * h_; }

  complex_t& at(int x, int y, int ch) {
    return data_[(static_cast<std::size_t>(ch) * h_ + y) * w_ + x];
  }
  complex_t at(int x, int y, int ch) const {
    return data_[(static_cast<std::size_t>(ch) * h_ + y) * w_ + x];
  }
  complex_t& operator[](std::size_t i) { return data_[i]; }
  complex_t operator[](std::size_t i) const { return data_[i]; }

  std::vector<complex_t>& data() { return data_; }
  const std::vector<complex_t>& data() const { return data_; }

  bool same_shape(const Spectrum& o) const {
    return w_ == o.w_ && h_ == o.h_ && c_ == o.c_;
  }

 private:
  int w_ = 0, h_ = 0, c_ = 0;
  std::vector<complex_t> data_;
};

inline void require_same_shape(const Tensor3& a, const Tensor3& b,
                               const char* where) {
  if (!a.same_shape(b))
    throw DimensionError(std::string(where) + ": shape mismatch " +
                         std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                         "x" + std::to_string(a.channels()) + " vs " +
                         std::to_string(b.width()) + "x" + std::to_string(b.height()) +
                         "x" + std::to_string(b.channels()));
}

// Elementwise helpers; all preserve iteration order.
inline Tensor3 operator+(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a, b, "operator+");
  Tensor3 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

inline Tensor3 operator-(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a, b, "operator-");
  Tensor3 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

inline Tensor3 operator*(const Tensor3& a, real_t s) {
  Tensor3 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  return out;
}

inline Tensor3 operator*(real_t s, const Tensor3& a) { return a * s; }

inline Tensor3 hadamard(const Tensor3& a, const Tensor3& b) {
  require_same_shape(a, b, "hadamard");
  Tensor3 out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

// Multiply every channel plane of t by a one-channel plane.
inline Tensor3 apply_window(const Tensor3& t, const Tensor3& window) {
  if (window.channels() != 1 || window.width() != t.width() ||
      window.height() != t.height())
    throw DimensionError("apply_window: window must be WxHx1 matching tensor");
  Tensor3 out = t;
  for (int ch = 0; ch < t.channels(); ++ch)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x)
        out.at(x, y, ch) *= window.at(x, y, 0);
  return out;
}

// Circular shift: out(x, y) = in((x + dx) mod W, (y + dy) mod H), per channel.
inline Tensor3 circshift(const Tensor3& t, int dx, int dy) {
  Tensor3 out(t.width(), t.height(), t.channels());
  const int w = t.width(), h = t.height();
  auto wrap = [](int v, int n) { return ((v % n) + n) % n; };
  for (int ch = 0; ch < t.channels(); ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.at(x, y, ch) = t.at(wrap(x + dx, w), wrap(y + dy, h), ch);
  return out;
}

}  // namespace rar
