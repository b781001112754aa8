#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/fft.hpp"
#include "rar/image.hpp"
#include "rar/ops.hpp"
#include "rar/raft.hpp"
#include "rar/tensor.hpp"

namespace rar {

// Handcrafted stand-in for a CNN backbone: three levels at one spatial
// resolution, increasingly smoothed, each L2-normalized per channel plane.
struct FeatureConfig {
  int cell_size = 4;
  int orientation_bins = 8;
  static constexpr int kLevels = 3;

  int channels() const { return 1 + orientation_bins; }
};

struct FeaturePyramid {
  std::vector<Tensor3> levels;  // index 0 = finest

  void validate() const {
    if (levels.size() != FeatureConfig::kLevels)
      throw DataError("FeaturePyramid: expected " +
                      std::to_string(FeatureConfig::kLevels) + " levels, got " +
                      std::to_string(levels.size()));
    for (std::size_t i = 1; i < levels.size(); ++i)
      if (levels[i].width() != levels[0].width() ||
          levels[i].height() != levels[0].height())
        throw DataError("FeaturePyramid: level " + std::to_string(i) +
                        " resolution differs from level 0");
    for (const Tensor3& t : levels)
      if (!t.all_finite()) throw DataError("FeaturePyramid: non-finite values");
  }
};

namespace detail {

inline void l2_normalize_planes(Tensor3& t) {
  for (int ch = 0; ch < t.channels(); ++ch) {
    real_t s = 0.0;
    for (int y = 0; y < t.height(); ++y)
      for (int x = 0; x < t.width(); ++x) s += t.at(x, y, ch) * t.at(x, y, ch);
    const real_t n = std::sqrt(s);
    if (n > 1e-12) {
      const real_t inv = 1.0 / n;
      for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x) t.at(x, y, ch) *= inv;
    }
  }
}

}  // namespace detail

// Per-cell channels: [mean intensity, gradient-magnitude histogram over
// unsigned orientation bins]. Gradients from central differences on the
// grayscale image with replicated borders.
inline Tensor3 compute_base_features(const ImageFrame& patch,
                                     const FeatureConfig& cfg) {
  if (patch.width != patch.height)
    throw ParameterError("compute_features: patch must be square");
  if (patch.width % cfg.cell_size != 0)
    throw ParameterError("compute_features: patch side not divisible by cell size");
  const int cells = patch.width / cfg.cell_size;
  const int ch_count = cfg.channels();
  Tensor3 out(cells, cells, ch_count);

  std::vector<real_t> gray(static_cast<std::size_t>(patch.width) * patch.height);
  for (int y = 0; y < patch.height; ++y)
    for (int x = 0; x < patch.width; ++x)
      gray[static_cast<std::size_t>(y) * patch.width + x] =
          (0.299 * patch.at(x, y, 0) + 0.587 * patch.at(x, y, 1) +
           0.114 * patch.at(x, y, 2)) /
          255.0;
  auto g = [&](int x, int y) {
    x = std::clamp(x, 0, patch.width - 1);
    y = std::clamp(y, 0, patch.height - 1);
    return gray[static_cast<std::size_t>(y) * patch.width + x];
  };

  const real_t cell_norm = 1.0 / (static_cast<real_t>(cfg.cell_size) * cfg.cell_size);
  for (int cy = 0; cy < cells; ++cy)
    for (int cx = 0; cx < cells; ++cx) {
      real_t mean = 0.0;
      for (int py = 0; py < cfg.cell_size; ++py)
        for (int px = 0; px < cfg.cell_size; ++px) {
          const int x = cx * cfg.cell_size + px;
          const int y = cy * cfg.cell_size + py;
          mean += g(x, y);
          const real_t gx = 0.5 * (g(x + 1, y) - g(x - 1, y));
          const real_t gy = 0.5 * (g(x, y + 1) - g(x, y - 1));
          const real_t mag = std::sqrt(gx * gx + gy * gy);
          if (mag > 0.0) {
            real_t ang = std::atan2(gy, gx);  // (-pi, pi]
            if (ang < 0) ang += M_PI;         // unsigned orientation [0, pi)
            if (ang >= M_PI) ang -= M_PI;
            int bin = static_cast<int>(ang / M_PI * cfg.orientation_bins);
            bin = std::clamp(bin, 0, cfg.orientation_bins - 1);
            out.at(cx, cy, 1 + bin) += mag;
          }
        }
      out.at(cx, cy, 0) = mean * cell_norm;
    }
  return out;
}

inline FeaturePyramid compute_features(const ImageFrame& patch,
                                       const FeatureConfig& cfg) {
  Tensor3 base = compute_base_features(patch, cfg);
  FeaturePyramid pyr;
  pyr.levels.push_back(base);
  pyr.levels.push_back(block_avg_smooth(base, 2));
  pyr.levels.push_back(block_avg_smooth(base, 4));
  for (Tensor3& t : pyr.levels) detail::l2_normalize_planes(t);
  pyr.validate();
  return pyr;
}

inline void save_feature_file(const FeaturePyramid& pyr, const std::string& path) {
  raft::save(pyr.levels, path);
}

inline FeaturePyramid load_feature_file(const std::string& path) {
  FeaturePyramid pyr;
  pyr.levels = raft::load(path);
  pyr.validate();
  return pyr;
}

}  // namespace rar
