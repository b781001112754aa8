#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/tensor.hpp"

namespace rar {

enum class PoolAxis { Spatial, Channel };
enum class PoolKind { Avg, Max };

// Spatial pooling collapses W x H to 1 x 1 (one value per channel);
// channel pooling collapses C to 1 (one value per spatial site).
// Max pooling records argmax indices (first maximum in iteration order)
// so the backward pass routes gradients deterministically.
inline Tensor3 pool(const Tensor3& t, PoolAxis axis, PoolKind kind,
                    std::vector<std::size_t>* argmax = nullptr) {
  if (axis == PoolAxis::Spatial) {
    Tensor3 out(1, 1, t.channels());
    if (argmax) argmax->assign(t.channels(), 0);
    for (int ch = 0; ch < t.channels(); ++ch) {
      if (kind == PoolKind::Avg) {
        real_t s = 0.0;
        for (int y = 0; y < t.height(); ++y)
          for (int x = 0; x < t.width(); ++x) s += t.at(x, y, ch);
        out.at(0, 0, ch) = s / static_cast<real_t>(t.plane_size());
      } else {
        real_t best = t.at(0, 0, ch);
        std::size_t best_i = 0;
        for (int y = 0; y < t.height(); ++y)
          for (int x = 0; x < t.width(); ++x) {
            const real_t v = t.at(x, y, ch);
            if (v > best) {
              best = v;
              best_i = static_cast<std::size_t>(y) * t.width() + x;
            }
          }
        out.at(0, 0, ch) = best;
        if (argmax) (*argmax)[ch] = best_i;
      }
    }
    return out;
  }
  Tensor3 out(t.width(), t.height(), 1);
  if (argmax) argmax->assign(t.plane_size(), 0);
  for (int y = 0; y < t.height(); ++y)
    for (int x = 0; x < t.width(); ++x) {
      if (kind == PoolKind::Avg) {
        real_t s = 0.0;
        for (int ch = 0; ch < t.channels(); ++ch) s += t.at(x, y, ch);
        out.at(x, y, 0) = s / static_cast<real_t>(t.channels());
      } else {
        real_t best = t.at(x, y, 0);
        std::size_t best_ch = 0;
        for (int ch = 1; ch < t.channels(); ++ch) {
          const real_t v = t.at(x, y, ch);
          if (v > best) {
            best = v;
            best_ch = static_cast<std::size_t>(ch);
          }
        }
        out.at(x, y, 0) = best;
        if (argmax) (*argmax)[static_cast<std::size_t>(y) * t.width() + x] = best_ch;
      }
    }
  return out;
}

// Adjoint of pool; `argmax` must come from the matching forward call for
// max pooling. Accumulates into a fresh tensor shaped like the input.
inline Tensor3 pool_backward(const Tensor3& grad_out, const Tensor3& input,
                             PoolAxis axis, PoolKind kind,
                             const std::vector<std::size_t>& argmax = {}) {
  Tensor3 grad_in(input.width(), input.height(), input.channels());
  if (axis == PoolAxis::Spatial) {
    for (int ch = 0; ch < input.channels(); ++ch) {
      const real_t g = grad_out.at(0, 0, ch);
      if (kind == PoolKind::Avg) {
        const real_t share = g / static_cast<real_t>(input.plane_size());
        for (int y = 0; y < input.height(); ++y)
          for (int x = 0; x < input.width(); ++x) grad_in.at(x, y, ch) += share;
      } else {
        const std::size_t i = argmax[ch];
        grad_in.at(static_cast<int>(i % input.width()),
                   static_cast<int>(i / input.width()), ch) += g;
      }
    }
  } else {
    for (int y = 0; y < input.height(); ++y)
      for (int x = 0; x < input.width(); ++x) {
        const real_t g = grad_out.at(x, y, 0);
        if (kind == PoolKind::Avg) {
          const real_t share = g / static_cast<real_t>(input.channels());
          for (int ch = 0; ch < input.channels(); ++ch)
            grad_in.at(x, y, ch) += share;
        } else {
          grad_in.at(x, y, static_cast<int>(
                              argmax[static_cast<std::size_t>(y) * input.width() + x])) += g;
        }
      }
  }
  return grad_in;
}

// Dense convolution kernel bank: out_channels kernels of size k x k x in_channels
// plus one bias per output channel. Weight layout:
// w[((oc * in_ch + ic) * k + ky) * k + kx].
struct ConvKernels {
  int ksize = 0;
  int in_ch = 0;
  int out_ch = 0;
  std::vector<real_t> w;
  std::vector<real_t> bias;

  ConvKernels() = default;
  ConvKernels(int k, int in_channels, int out_channels)
      : ksize(k), in_ch(in_channels), out_ch(out_channels) {
    if (k <= 0 || k % 2 == 0)
      throw ParameterError("ConvKernels: kernel size must be odd, got " +
                           std::to_string(k));
    w.assign(static_cast<std::size_t>(k) * k * in_ch * out_ch, 0.0);
    bias.assign(out_ch, 0.0);
  }

  real_t& at(int oc, int ic, int kx, int ky) {
    return w[((static_cast<std::size_t>(oc) * in_ch + ic) * ksize + ky) * ksize + kx];
  }
  real_t at(int oc, int ic, int kx, int ky) const {
    return w[((static_cast<std::size_t>(oc) * in_ch + ic) * ksize + ky) * ksize + kx];
  }

  // 1x1 kernels with identity channel mapping (requires in_ch == out_ch).
  static ConvKernels identity(int channels) {
    ConvKernels k(1, channels, channels);
    for (int c = 0; c < channels; ++c) k.at(c, c, 0, 0) = 1.0;
    return k;
  }
};

// Cross-correlation style convolution with zero padding, preserving W x H.
inline Tensor3 conv2d_same(const Tensor3& t, const ConvKernels& k) {
  if (k.in_ch != t.channels())
    throw DimensionError("conv2d_same: input has " + std::to_string(t.channels()) +
                         " channels, kernels expect " + std::to_string(k.in_ch));
  const int r = k.ksize / 2;
  Tensor3 out(t.width(), t.height(), k.out_ch);
  for (int oc = 0; oc < k.out_ch; ++oc)
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) {
        real_t s = k.bias[oc];
        for (int ic = 0; ic < k.in_ch; ++ic)
          for (int ky = -r; ky <= r; ++ky) {
            const int sy = y + ky;
            if (sy < 0 || sy >= t.height()) continue;
            for (int kx = -r; kx <= r; ++kx) {
              const int sx = x + kx;
              if (sx < 0 || sx >= t.width()) continue;
              s += k.at(oc, ic, kx + r, ky + r) * t.at(sx, sy, ic);
            }
          }
        out.at(x, y, oc) = s;
      }
  return out;
}

// Adjoint of conv2d_same: gradients w.r.t. input, kernel weights and biases.
inline void conv2d_same_backward(const Tensor3& grad_out, const Tensor3& input,
                                 const ConvKernels& k, Tensor3* grad_in,
                                 ConvKernels* grad_k) {
  const int r = k.ksize / 2;
  if (grad_in) *grad_in = Tensor3(input.width(), input.height(), input.channels());
  if (grad_k) *grad_k = ConvKernels(k.ksize, k.in_ch, k.out_ch);
  for (int oc = 0; oc < k.out_ch; ++oc)
    for (int y = 0; y < input.height(); ++y)
      for (int x = 0; x < input.width(); ++x) {
        const real_t g = grad_out.at(x, y, oc);
        if (g == 0.0) continue;
        if (grad_k) grad_k->bias[oc] += g;
        for (int ic = 0; ic < k.in_ch; ++ic)
          for (int ky = -r; ky <= r; ++ky) {
            const int sy = y + ky;
            if (sy < 0 || sy >= input.height()) continue;
            for (int kx = -r; kx <= r; ++kx) {
              const int sx = x + kx;
              if (sx < 0 || sx >= input.width()) continue;
              if (grad_in) grad_in->at(sx, sy, ic) += g * k.at(oc, ic, kx + r, ky + r);
              if (grad_k) grad_k->at(oc, ic, kx + r, ky + r) += g * input.at(sx, sy, ic);
            }
          }
      }
}

// Non-overlapping block average pooling followed by nearest-neighbour
// upsampling back to the original size; W and H must be divisible by block.
inline Tensor3 block_avg_smooth(const Tensor3& t, int block) {
  if (block <= 0 || t.width() % block != 0 || t.height() % block != 0)
    throw ParameterError("block_avg_smooth: size must divide dimensions");
  Tensor3 out(t.width(), t.height(), t.channels());
  const real_t inv = 1.0 / (static_cast<real_t>(block) * block);
  for (int ch = 0; ch < t.channels(); ++ch)
    for (int by = 0; by < t.height(); by += block)
      for (int bx = 0; bx < t.width(); bx += block) {
        real_t s = 0.0;
        for (int y = 0; y < block; ++y)
          for (int x = 0; x < block; ++x) s += t.at(bx + x, by + y, ch);
        s *= inv;
        for (int y = 0; y < block; ++y)
          for (int x = 0; x < block; ++x) out.at(bx + x, by + y, ch) = s;
      }
  return out;
}

inline real_t sigmoid(real_t v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace rar
