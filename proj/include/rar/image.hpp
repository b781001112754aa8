#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "rar/error.hpp"
#include "rar/tensor.hpp"

namespace rar {

// 8-bit RGB frame, row-major, interleaved.
struct ImageFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  ImageFrame() = default;
  ImageFrame(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h),
        pixels(static_cast<std::size_t>(w) * h * 3, fill) {
    if (w < 1 || h < 1) throw DimensionError("ImageFrame: empty frame");
  }

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// Axis-aligned rectangle in pixel coordinates.
struct Rect {
  real_t x = 0, y = 0, w = 0, h = 0;

  real_t cx() const { return x + w / 2.0; }
  real_t cy() const { return y + h / 2.0; }
  real_t area() const { return w * h; }
};

namespace detail {

// Sample with replicated borders.
inline real_t sample_channel(const ImageFrame& f, int x, int y, int c) {
  x = std::clamp(x, 0, f.width - 1);
  y = std::clamp(y, 0, f.height - 1);
  return static_cast<real_t>(f.at(x, y, c));
}

inline real_t bilinear(const ImageFrame& f, real_t x, real_t y, int c) {
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const real_t fx = x - x0, fy = y - y0;
  const real_t v00 = sample_channel(f, x0, y0, c);
  const real_t v10 = sample_channel(f, x0 + 1, y0, c);
  const real_t v01 = sample_channel(f, x0, y0 + 1, c);
  const real_t v11 = sample_channel(f, x0 + 1, y0 + 1, c);
  return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
}

}  // namespace detail

// Crop a square region of side max(w, h) * (1 + padding_factor) centered on
// the bbox center, replicating edge pixels beyond the frame, and bilinearly
// resample it to out_size x out_size.
inline ImageFrame extract_patch(const ImageFrame& frame, const Rect& bbox,
                                real_t padding_factor, int out_size) {
  if (bbox.w < 1 || bbox.h < 1)
    throw ParameterError("extract_patch: degenerate bbox");
  if (out_size < 1) throw ParameterError("extract_patch: bad output size");
  const real_t side = std::max(bbox.w, bbox.h) * (1.0 + padding_factor);
  const real_t cx = bbox.cx(), cy = bbox.cy();
  ImageFrame out(out_size, out_size);
  const real_t step = side / out_size;
  // Map output pixel centers onto the source region.
  for (int y = 0; y < out_size; ++y) {
    const real_t sy = cy - side / 2.0 + (y + 0.5) * step - 0.5;
    for (int x = 0; x < out_size; ++x) {
      const real_t sx = cx - side / 2.0 + (x + 0.5) * step - 0.5;
      for (int c = 0; c < 3; ++c) {
        const real_t v = detail::bilinear(frame, sx, sy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

// Variant used by the tracker: the crop side is given explicitly (already
// scale-adjusted), still centered on the bbox center.
inline ImageFrame extract_patch_side(const ImageFrame& frame, real_t cx,
                                     real_t cy, real_t side, int out_size) {
  if (side < 1) throw ParameterError("extract_patch_side: degenerate side");
  ImageFrame out(out_size, out_size);
  const real_t step = side / out_size;
  for (int y = 0; y < out_size; ++y) {
    const real_t sy = cy - side / 2.0 + (y + 0.5) * step - 0.5;
    for (int x = 0; x < out_size; ++x) {
      const real_t sx = cx - side / 2.0 + (x + 0.5) * step - 0.5;
      for (int c = 0; c < 3; ++c) {
        const real_t v = detail::bilinear(frame, sx, sy, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(
            std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace rar
