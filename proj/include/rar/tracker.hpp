#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rar/attention.hpp"
#include "rar/dcf.hpp"
#include "rar/error.hpp"
#include "rar/features.hpp"
#include "rar/image.hpp"
#include "rar/signal.hpp"
#include "rar/tensor.hpp"

namespace rar {

// Ablation hook: forced_neutral drives the gating maps to exactly 1 with an
// identity-sum refinement; off bypasses the attention code entirely and
// composes the arithmetically identical map 2 * sum(levels).
enum class AttentionMode { kNormal, kForcedNeutral, kOff };

inline AttentionMode attention_mode_from_string(const std::string& s) {
  if (s == "normal") return AttentionMode::kNormal;
  if (s == "forced_neutral") return AttentionMode::kForcedNeutral;
  if (s == "off") return AttentionMode::kOff;
  throw ConfigError("attention_mode must be normal, forced_neutral or off, got '" +
                    s + "'");
}

struct TrackerConfig {
  real_t padding_factor = 2.0;
  real_t scale_base = 1.02;  // a
  int scale_count = 3;       // S, odd
  real_t lambda1 = 1e-4;
  real_t lambda2 = 0.1;
  real_t eta = 0.013;
  real_t scale_damping = 0.6;
  real_t scale_penalty = 0.97;
  int patch_size = 128;
  int cell_size = 4;
  int context_k = 4;
  real_t label_sigma_factor = 0.1;
  bool per_scale_attention = false;
  AttentionMode attention_mode = AttentionMode::kNormal;

  int cells() const { return patch_size / cell_size; }

  void validate() const {
    if (scale_count < 1 || scale_count % 2 == 0)
      throw ParameterError("TrackerConfig: scale_count must be odd");
    if (scale_base <= 1.0)
      throw ParameterError("TrackerConfig: scale_base must be > 1");
    if (scale_penalty <= 0.0 || scale_penalty > 1.0)
      throw ParameterError("TrackerConfig: scale_penalty must be in (0,1]");
    if (scale_damping < 0.0 || scale_damping > 1.0)
      throw ParameterError("TrackerConfig: scale_damping must be in [0,1]");
    if (patch_size % cell_size != 0)
      throw ParameterError("TrackerConfig: patch_size not divisible by cell_size");
    if (!is_power_of_two(patch_size / cell_size))
      throw ParameterError("TrackerConfig: feature grid must be a power of two");
  }
};

struct TrackerState {
  TrackerConfig cfg;
  AttentionParams params;
  FeatureConfig features;

  Rect bbox;                         // current estimate, image pixels
  real_t scale = 1.0;                // relative to the initial target size
  real_t base_w = 0.0, base_h = 0.0; // initial target size
  real_t base_side = 0.0;            // unscaled crop side

  std::vector<ConvLstmState> lstm;   // per level
  std::vector<Tensor3> hc_prev;      // per level channel gates (1x1xC)
  FilterModel model;
  Tensor3 label;
  Spectrum label_hat;
  long frame_index = 0;

  real_t last_confidence = 0.0;
  Tensor3 last_response;             // winning-scale response plane
};

namespace detail {

// Attention + refinement over a search/template pyramid under the configured
// mode. Read-only with respect to the recurrent state.
inline Tensor3 tracker_attend(const FeaturePyramid& pyr, const TrackerState& st,
                              std::vector<LevelAttendCache>* caches = nullptr) {
  const std::size_t n = pyr.levels.size();
  if (st.cfg.attention_mode == AttentionMode::kOff) {
    Tensor3 sum = pyr.levels[n - 1];
    for (std::size_t li = n - 1; li-- > 0;) sum = sum + pyr.levels[li];
    return 2.0 * sum;
  }
  std::vector<Tensor3> attended;
  if (st.cfg.attention_mode == AttentionMode::kForcedNeutral) {
    const Tensor3& l0 = pyr.levels[0];
    Tensor3 psi_c(1, 1, l0.channels(), 1.0);
    Tensor3 psi_s(l0.width(), l0.height(), 1, 1.0);
    for (const Tensor3& phi : pyr.levels)
      attended.push_back(reinforce(phi, psi_c, psi_s));
    RefineParams ident(l0.channels(), l0.channels(), static_cast<int>(n));
    for (ConvKernels& k : ident.merge)
      for (int ch = 0; ch < l0.channels(); ++ch) k.at(ch, ch, 1, 1) = 1.0;
    ident.proj = ConvKernels::identity(l0.channels());
    return refine(attended, ident);
  }
  if (caches) caches->assign(n, LevelAttendCache{});
  for (std::size_t li = 0; li < n; ++li) {
    const Tensor3* hc = li < st.hc_prev.size() ? &st.hc_prev[li] : nullptr;
    attended.push_back(attend_level(pyr.levels[li], st.lstm[li], hc,
                                    st.params.levels[li],
                                    caches ? &(*caches)[li] : nullptr)
                           .phi_a);
  }
  return refine(attended, st.params.refine);
}

// Attention pass that advances the recurrent state from the new template.
inline Tensor3 tracker_attend_update(const FeaturePyramid& pyr, TrackerState& st) {
  if (st.cfg.attention_mode != AttentionMode::kNormal)
    return tracker_attend(pyr, st);
  std::vector<Tensor3> attended;
  for (std::size_t li = 0; li < pyr.levels.size(); ++li) {
    const Tensor3* hc = li < st.hc_prev.size() ? &st.hc_prev[li] : nullptr;
    LevelAttendResult r =
        attend_level(pyr.levels[li], st.lstm[li], hc, st.params.levels[li]);
    st.lstm[li] = r.state;
    if (st.hc_prev.size() <= li)
      st.hc_prev.push_back(r.gates.hc);
    else
      st.hc_prev[li] = r.gates.hc;
    attended.push_back(std::move(r.phi_a));
  }
  return refine(attended, st.params.refine);
}

inline Rect target_cells_rect(const TrackerState& st) {
  const real_t cells_per_px =
      static_cast<real_t>(st.cfg.patch_size) / st.base_side / st.cfg.cell_size;
  return Rect{0, 0, st.base_w * cells_per_px, st.base_h * cells_per_px};
}

inline FeaturePyramid featurize_crop(const ImageFrame& frame, const TrackerState& st,
                                     real_t side) {
  ImageFrame patch =
      extract_patch_side(frame, st.bbox.cx(), st.bbox.cy(), side, st.cfg.patch_size);
  return compute_features(patch, st.features);
}

// Retrain the filter accumulators from the current template crop.
inline void update_model(TrackerState& st, const ImageFrame& frame, real_t eta) {
  FeaturePyramid pyr = featurize_crop(frame, st, st.base_side * st.scale);
  Tensor3 feat = tracker_attend_update(pyr, st);
  ContextSet cs = make_context_set(feat, target_cells_rect(st), st.cfg.context_k);
  Spectrum num_t, den_t;
  train_filter_frame(cs, st.label_hat, st.cfg.lambda1, st.cfg.lambda2, &num_t, &den_t);
  update_filter(st.model, num_t, den_t, eta);
}

}  // namespace detail

inline TrackerState tracker_init(const ImageFrame& frame, const Rect& bbox,
                                 const TrackerConfig& cfg,
                                 const AttentionParams& params) {
  cfg.validate();
  if (bbox.w < 1 || bbox.h < 1)
    throw ParameterError("tracker_init: degenerate bbox");
  if (cfg.attention_mode == AttentionMode::kNormal &&
      (params.levels.size() != FeatureConfig::kLevels ||
       params.channels != FeatureConfig{}.channels()))
    throw ConfigError("tracker_init: attention parameters do not match the feature "
                      "extractor (need " +
                      std::to_string(FeatureConfig::kLevels) + " levels, " +
                      std::to_string(FeatureConfig{}.channels()) + " channels)");

  TrackerState st;
  st.cfg = cfg;
  st.params = params;
  st.features.cell_size = cfg.cell_size;
  st.bbox = bbox;
  st.base_w = bbox.w;
  st.base_h = bbox.h;
  st.base_side = std::max(bbox.w, bbox.h) * (1.0 + cfg.padding_factor);

  const int cells = cfg.cells();
  const int ch = cfg.attention_mode == AttentionMode::kNormal
                     ? params.out_channels
                     : st.features.channels();
  st.model = FilterModel(cells, cells, ch, cfg.lambda1, cfg.lambda2, cfg.eta);

  Rect tc = detail::target_cells_rect(st);
  const real_t sigma =
      std::max(cfg.label_sigma_factor * std::sqrt(tc.w * tc.h), 0.5);
  st.label = gaussian_label(cells, cells, sigma, 0, 0);
  st.label_hat = fft2d(st.label);

  const int feat_ch = st.features.channels();
  for (int li = 0; li < FeatureConfig::kLevels; ++li)
    st.lstm.emplace_back(cells, cells, feat_ch);

  detail::update_model(st, frame, 1.0);  // first frame: full weight
  st.frame_index = 1;
  return st;
}

// One tracking step: evaluate the scale pyramid, localize, damp the scale,
// then update the recurrent state and the filter from the new template crop.
inline Rect tracker_step(TrackerState& st, const ImageFrame& frame) {
  const int half = st.cfg.scale_count / 2;
  const Tensor3 win = hann_window(st.cfg.cells(), st.cfg.cells());

  real_t best_score = -1e30;
  real_t best_conf = 0.0, best_dx = 0.0, best_dy = 0.0, best_factor = 1.0;
  Tensor3 best_plane;
  for (int si = -half; si <= half; ++si) {
    const real_t factor = std::pow(st.cfg.scale_base, si);
    const real_t side = st.base_side * st.scale * factor;
    FeaturePyramid pyr = detail::featurize_crop(frame, st, side);
    Tensor3 feat = detail::tracker_attend(pyr, st);
    ResponseMap r = response(st.model, apply_window(feat, win));
    const real_t penalty = si == 0 ? 1.0 : st.cfg.scale_penalty;
    const real_t score = r.peak_value * penalty;
    if (score > best_score) {
      best_score = score;
      best_conf = r.peak_value;
      real_t dx, dy;
      locate(r, &dx, &dy, nullptr);
      best_dx = dx;
      best_dy = dy;
      best_factor = factor;
      best_plane = r.plane;
    }
  }

  const real_t side = st.base_side * st.scale * best_factor;
  const real_t px_per_cell =
      side / st.cfg.patch_size * st.cfg.cell_size;
  const real_t cx = st.bbox.cx() + best_dx * px_per_cell;
  const real_t cy = st.bbox.cy() + best_dy * px_per_cell;
  st.scale = (1.0 - st.cfg.scale_damping) * st.scale +
             st.cfg.scale_damping * (st.scale * best_factor);
  st.bbox.w = st.base_w * st.scale;
  st.bbox.h = st.base_h * st.scale;
  st.bbox.x = cx - st.bbox.w / 2.0;
  st.bbox.y = cy - st.bbox.h / 2.0;
  st.last_confidence = best_conf;
  st.last_response = std::move(best_plane);

  detail::update_model(st, frame, st.cfg.eta);
  st.frame_index += 1;
  return st.bbox;
}

// OTB-convention result line: "x,y,w,h" in image pixels.
inline std::string trajectory_line(const Rect& r) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.2f,%.2f,%.2f,%.2f", r.x, r.y, r.w, r.h);
  return buf;
}

}  // namespace rar
