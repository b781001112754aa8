#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "rar/attention.hpp"
#include "rar/dcf.hpp"
#include "rar/error.hpp"
#include "rar/features.hpp"
#include "rar/fft.hpp"
#include "rar/image.hpp"
#include "rar/rng.hpp"
#include "rar/signal.hpp"
#include "rar/tensor.hpp"

namespace rar {

struct TrainConfig {
  real_t lr_start = 1e-3;
  real_t lr_end = 1e-4;
  real_t momentum = 0.9;
  real_t weight_decay = 5e-4;
  real_t clip_norm = 10.0;
  int steps = 200;
  int batch = 8;
  std::uint64_t seed = 1;
  real_t lambda1 = 1e-4;
  real_t lambda2 = 0.1;
  int context_k = 4;
  real_t label_sigma_factor = 0.1;

  void validate() const {
    if (lr_end <= 0.0 || lr_end > lr_start)
      throw ParameterError("TrainConfig: need 0 < lr_end <= lr_start");
    if (momentum < 0.0 || momentum >= 1.0)
      throw ParameterError("TrainConfig: momentum must be in [0,1)");
    if (steps < 1 || batch < 1)
      throw ParameterError("TrainConfig: steps and batch must be positive");
  }
};

// Log-linear interpolation from lr_start at step 0 to lr_end at the last step.
inline real_t learning_rate(const TrainConfig& cfg, long step) {
  if (cfg.steps <= 1) return cfg.lr_start;
  const real_t t = static_cast<real_t>(step) / (cfg.steps - 1);
  return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, std::min(t, 1.0));
}

// ---------------------------------------------------------------------------
// Correlation layer: closed-form single-frame filter inside the loss
// ---------------------------------------------------------------------------

struct CorrCache {
  Spectrum z0_hat;                // C planes
  std::vector<Spectrum> zi_hat;   // k entries, C planes each
  Spectrum x_hat;                 // C planes
  Spectrum y_hat;                 // 1 plane
  Spectrum den;                   // C*C planes (per-bin system matrix)
  Spectrum v;                     // C planes (solved filter)
  Tensor3 g;                      // spatial response
  Tensor3 label;
  real_t lambda2 = 0.0;
  real_t max_imag = 0.0;
};

// L = sum_s (g[s] - y[s])^2 with g the response of the single-frame (T = 1)
// closed-form filter trained on the context set.
inline real_t corr_forward(const ContextSet& cs, const Tensor3& x_features,
                           const Tensor3& label, real_t lambda1, real_t lambda2,
                           CorrCache* cache = nullptr) {
  require_same_shape(cs.target, x_features, "corr_forward");
  if (label.channels() != 1 || label.width() != cs.target.width() ||
      label.height() != cs.target.height())
    throw DimensionError("corr_forward: label must be WxHx1 matching features");

  Spectrum y_hat = fft2d(label);
  Spectrum num, den;
  train_filter_frame(cs, y_hat, lambda1, lambda2, &num, &den);
  FilterModel m(cs.target.width(), cs.target.height(), cs.target.channels(),
                lambda1, lambda2, 1.0);
  m.num = num;
  m.den = den;
  Spectrum v = solve_filter(m);

  Spectrum x_hat = fft2d(x_features);
  const int c = cs.target.channels();
  const std::size_t plane = cs.target.plane_size();
  Spectrum g_hat(cs.target.width(), cs.target.height(), 1);
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t b = 0; b < plane; ++b)
      g_hat[b] += x_hat[static_cast<std::size_t>(ch) * plane + b] *
                  v[static_cast<std::size_t>(ch) * plane + b];
  real_t max_imag = 0.0;
  Tensor3 g = ifft2d_checked(g_hat, &max_imag);

  real_t loss = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const real_t r = g[i] - label[i];
    loss += r * r;
  }
  if (cache) {
    cache->z0_hat = fft2d(cs.target);
    cache->zi_hat.clear();
    for (const Tensor3& ctx : cs.contexts) cache->zi_hat.push_back(fft2d(ctx));
    cache->x_hat = std::move(x_hat);
    cache->y_hat = std::move(y_hat);
    cache->den = std::move(den);
    cache->v = std::move(v);
    cache->g = std::move(g);
    cache->label = label;
    cache->lambda2 = lambda2;
    cache->max_imag = max_imag;
  }
  return loss;
}

// Analytic adjoints of corr_forward w.r.t. the spatial feature maps. All
// intermediate steps are linear or bilinear in the spectra, so the chain is
// a sequence of adjoint applications:
//   d_g = 2 (g - y);  d_ghat = fft(d_g) / N
//   d_v = conj(xhat) d_ghat;  d_xhat = conj(v) d_ghat
//   per bin: u = M^{-1} d_v (M Hermitian), d_num = u, d_M = -u v^H
//   d_z0hat = conj(d_num) yhat + (conj(d_M) + d_M^T) z0hat
//   d_zihat = lambda2 (conj(d_M) + d_M^T) zihat
//   spatial d = N * Re(ifft(d_hat))   (inputs are real)
inline void corr_backward(const CorrCache& cache, Tensor3* d_x, Tensor3* d_z0,
                          std::vector<Tensor3>* d_zi, real_t* max_imag_out = nullptr) {
  const int w = cache.g.width(), h = cache.g.height();
  const int c = cache.z0_hat.channels();
  const std::size_t plane = cache.g.plane_size();
  const real_t n = static_cast<real_t>(plane);

  Tensor3 d_g(w, h, 1);
  for (std::size_t i = 0; i < d_g.size(); ++i)
    d_g[i] = 2.0 * (cache.g[i] - cache.label[i]);
  Spectrum d_ghat = fft2d(d_g);
  for (std::size_t i = 0; i < d_ghat.size(); ++i) d_ghat[i] /= n;

  Spectrum d_v(w, h, c), d_xhat(w, h, c);
  for (int ch = 0; ch < c; ++ch)
    for (std::size_t b = 0; b < plane; ++b) {
      const std::size_t i = static_cast<std::size_t>(ch) * plane + b;
      d_v[i] = std::conj(cache.x_hat[i]) * d_ghat[b];
      d_xhat[i] = std::conj(cache.v[i]) * d_ghat[b];
    }

  Spectrum d_z0hat(w, h, c);
  std::vector<Spectrum> d_zihat(cache.zi_hat.size(), Spectrum(w, h, c));
  std::vector<complex_t> M(static_cast<std::size_t>(c) * c), u(c), dM(M.size());
  for (std::size_t b = 0; b < plane; ++b) {
    for (int p = 0; p < c; ++p) {
      u[p] = d_v[static_cast<std::size_t>(p) * plane + b];
      for (int q = 0; q < c; ++q)
        M[static_cast<std::size_t>(p) * c + q] =
            cache.den[(static_cast<std::size_t>(p) * c + q) * plane + b];
    }
    if (c == 1) {
      u[0] /= M[0];
    } else {
      std::vector<complex_t> A = M;
      detail::solve_small_complex(A, u, c);
    }
    for (int p = 0; p < c; ++p)
      for (int q = 0; q < c; ++q)
        dM[static_cast<std::size_t>(p) * c + q] =
            -u[p] * std::conj(cache.v[static_cast<std::size_t>(q) * plane + b]);
    for (int p = 0; p < c; ++p) {
      complex_t acc = std::conj(u[p]) * cache.y_hat[b];
      for (int q = 0; q < c; ++q) {
        const complex_t s = std::conj(dM[static_cast<std::size_t>(p) * c + q]) +
                            dM[static_cast<std::size_t>(q) * c + p];
        acc += s * cache.z0_hat[static_cast<std::size_t>(q) * plane + b];
      }
      d_z0hat[static_cast<std::size_t>(p) * plane + b] = acc;
      for (std::size_t zi = 0; zi < cache.zi_hat.size(); ++zi) {
        complex_t ci(0.0, 0.0);
        for (int q = 0; q < c; ++q) {
          const complex_t s = std::conj(dM[static_cast<std::size_t>(p) * c + q]) +
                              dM[static_cast<std::size_t>(q) * c + p];
          ci += s * cache.zi_hat[zi][static_cast<std::size_t>(q) * plane + b];
        }
        d_zihat[zi][static_cast<std::size_t>(p) * plane + b] = cache.lambda2 * ci;
      }
    }
  }

  real_t worst_imag = 0.0;
  auto to_spatial = [&](const Spectrum& s) {
    real_t mi = 0.0;
    Tensor3 t = ifft2d_checked(s, &mi);
    worst_imag = std::max(worst_imag, mi);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= n;
    return t;
  };
  if (d_x) *d_x = to_spatial(d_xhat);
  if (d_z0) *d_z0 = to_spatial(d_z0hat);
  if (d_zi) {
    d_zi->clear();
    for (const Spectrum& s : d_zihat) d_zi->push_back(to_spatial(s));
  }
  if (max_imag_out) *max_imag_out = worst_imag;
}

// ---------------------------------------------------------------------------
// Full training graph: features -> attention -> refine -> correlation loss
// ---------------------------------------------------------------------------

struct TrainSample {
  FeaturePyramid z_pyr;  // template-frame pyramid
  FeaturePyramid x_pyr;  // search-frame pyramid
  Rect target_cells;     // target extent in feature cells (for contexts)
  Tensor3 label;         // desired response, WxHx1
};

struct GraphCache {
  std::vector<LevelAttendCache> z_attend, x_attend;
  RefineCache z_refine, x_refine;
  ContextSet cs;
  Tensor3 x_windowed;
  Tensor3 window;
  CorrCache corr;
};

namespace detail {

// Attention + refinement over one pyramid; caches per level for backward.
inline Tensor3 attend_pyramid(const FeaturePyramid& pyr, const AttentionParams& p,
                              std::vector<LevelAttendCache>* caches,
                              RefineCache* rcache) {
  if (pyr.levels.size() != p.levels.size())
    throw ConfigError("attend_pyramid: pyramid has " +
                      std::to_string(pyr.levels.size()) + " levels, params expect " +
                      std::to_string(p.levels.size()));
  const Tensor3& l0 = pyr.levels[0];
  ConvLstmState zero(l0.width(), l0.height(), l0.channels());
  std::vector<Tensor3> attended;
  if (caches) caches->assign(pyr.levels.size(), LevelAttendCache{});
  for (std::size_t li = 0; li < pyr.levels.size(); ++li)
    attended.push_back(attend_level(pyr.levels[li], zero, nullptr, p.levels[li],
                                    caches ? &(*caches)[li] : nullptr)
                           .phi_a);
  return refine(attended, p.refine, rcache);
}

inline void axpy(std::vector<real_t>& dst, const std::vector<real_t>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

inline void accumulate_kernels(ConvKernels& dst, const ConvKernels& src) {
  axpy(dst.w, src.w);
  axpy(dst.bias, src.bias);
}

inline void accumulate_level(LevelAttentionParams& dst, const LevelAttendGrads& g,
                             bool shared_lstm) {
  const int ngates = shared_lstm ? 1 : 4;
  for (int gi = 0; gi < ngates; ++gi) {
    accumulate_kernels(dst.lstm.wi[gi], g.lstm.wi[gi]);
    accumulate_kernels(dst.lstm.wh[gi], g.lstm.wh[gi]);
  }
  accumulate_kernels(dst.proj.w_hc, g.proj.w_hc);
  accumulate_kernels(dst.proj.w_hs, g.proj.w_hs);
  accumulate_kernels(dst.channel.w_phi, g.channel.w_phi);
  accumulate_kernels(dst.channel.w_h, g.channel.w_h);
  accumulate_kernels(dst.channel.w_o, g.channel.w_o);
  accumulate_kernels(dst.spatial.w_phi, g.spatial.w_phi);
  accumulate_kernels(dst.spatial.w_h, g.spatial.w_h);
  accumulate_kernels(dst.spatial.w_o, g.spatial.w_o);
}

inline void accumulate_refine(RefineParams& dst, const RefineGrads& g) {
  for (std::size_t i = 0; i < dst.merge.size(); ++i)
    accumulate_kernels(dst.merge[i], g.merge[i]);
  accumulate_kernels(dst.proj, g.proj);
}

}  // namespace detail

// Zero-valued gradients shaped like p (kernels construct zero-filled).
inline AttentionParams zero_grads(const AttentionParams& p) {
  return AttentionParams(static_cast<int>(p.levels.size()), p.channels,
                         p.out_channels, p.reduction,
                         p.levels.empty() ? false : p.levels[0].lstm.shared_weights);
}

// corr loss of one sample under the current attention parameters.
inline real_t forward_loss(const AttentionParams& params, const TrainSample& sample,
                           const TrainConfig& cfg, GraphCache* cache) {
  GraphCache local;
  GraphCache& gc = cache ? *cache : local;
  Tensor3 z_feat = detail::attend_pyramid(sample.z_pyr, params,
                                          cache ? &gc.z_attend : nullptr,
                                          cache ? &gc.z_refine : nullptr);
  Tensor3 x_feat = detail::attend_pyramid(sample.x_pyr, params,
                                          cache ? &gc.x_attend : nullptr,
                                          cache ? &gc.x_refine : nullptr);
  gc.cs = make_context_set(z_feat, sample.target_cells, cfg.context_k);
  gc.window = hann_window(x_feat.width(), x_feat.height());
  gc.x_windowed = apply_window(x_feat, gc.window);
  return corr_forward(gc.cs, gc.x_windowed, sample.label, cfg.lambda1, cfg.lambda2,
                      cache ? &gc.corr : nullptr);
}

struct GradientSet {
  Tensor3 d_x;               // w.r.t. the windowed search features
  Tensor3 d_z0;              // w.r.t. the windowed template
  std::vector<Tensor3> d_zi; // w.r.t. each windowed context
  AttentionParams d_params;
};

// Full backward: Fourier-domain adjoints, undo the window/shift construction
// of the context set, then chain through refine and attention on both the
// template and search branches (shared parameters: gradients sum).
inline GradientSet backward(const AttentionParams& params, const GraphCache& gc) {
  GradientSet out;
  out.d_params = zero_grads(params);
  corr_backward(gc.corr, &out.d_x, &out.d_z0, &out.d_zi);

  Tensor3 d_x_feat = apply_window(out.d_x, gc.window);
  Tensor3 d_z_feat = apply_window(out.d_z0, gc.window);
  for (std::size_t i = 0; i < out.d_zi.size(); ++i) {
    Tensor3 t = apply_window(out.d_zi[i], gc.window);
    const auto [dx, dy] = gc.cs.offsets[i];
    t = circshift(t, -dx, -dy);
    for (std::size_t k = 0; k < d_z_feat.size(); ++k) d_z_feat[k] += t[k];
  }

  const bool shared = params.levels[0].lstm.shared_weights;
  auto branch = [&](const Tensor3& d_feat, const RefineCache& rcache,
                    const std::vector<LevelAttendCache>& acaches) {
    std::vector<Tensor3> d_levels;
    RefineGrads rg;
    refine_backward(d_feat, rcache, params.refine, &d_levels, &rg);
    detail::accumulate_refine(out.d_params.refine, rg);
    for (std::size_t li = 0; li < acaches.size(); ++li) {
      LevelAttendGrads lg;
      attend_level_backward(d_levels[li], acaches[li], params.levels[li], &lg);
      detail::accumulate_level(out.d_params.levels[li], lg, shared);
    }
  };
  branch(d_z_feat, gc.z_refine, gc.z_attend);
  branch(d_x_feat, gc.x_refine, gc.x_attend);
  return out;
}

// ---------------------------------------------------------------------------
// SGD with momentum, weight decay, gradient clipping
// ---------------------------------------------------------------------------

struct ParamRef {
  std::string name;
  std::vector<real_t>* v;
};

inline std::vector<ParamRef> param_list(AttentionParams& p) {
  std::vector<ParamRef> out;
  for_each_param(p, [&](const std::string& name, std::vector<real_t>& v, int, int) {
    out.push_back({name, &v});
  });
  return out;
}

inline real_t grad_norm(AttentionParams& grads) {
  real_t s = 0.0;
  for (ParamRef& r : param_list(grads))
    for (real_t g : *r.v) s += g * g;
  return std::sqrt(s);
}

// Scales gradients in place so their global L2 norm is at most clip_norm.
inline real_t clip_gradients(AttentionParams& grads, real_t clip_norm) {
  const real_t norm = grad_norm(grads);
  if (clip_norm > 0.0 && norm > clip_norm) {
    const real_t f = clip_norm / norm;
    for (ParamRef& r : param_list(grads))
      for (real_t& g : *r.v) g *= f;
  }
  return norm;
}

struct SgdState {
  AttentionParams velocity;
  long step = 0;
};

inline SgdState make_sgd_state(const AttentionParams& params) {
  return SgdState{zero_grads(params), 0};
}

// v <- momentum v + grad + wd * param;  param <- param - lr(step) * v.
inline void sgd_step(AttentionParams& params, AttentionParams& grads, SgdState& st,
                     const TrainConfig& cfg) {
  const real_t lr = learning_rate(cfg, st.step);
  std::vector<ParamRef> ps = param_list(params);
  std::vector<ParamRef> gs = param_list(grads);
  std::vector<ParamRef> vs = param_list(st.velocity);
  for (std::size_t i = 0; i < ps.size(); ++i) {
    std::vector<real_t>& p = *ps[i].v;
    const std::vector<real_t>& g = *gs[i].v;
    std::vector<real_t>& v = *vs[i].v;
    for (std::size_t k = 0; k < p.size(); ++k) {
      if (!std::isfinite(g[k]))
        throw TrainingError("sgd_step: non-finite gradient in " + ps[i].name);
      v[k] = cfg.momentum * v[k] + g[k] + cfg.weight_decay * p[k];
      p[k] -= lr * v[k];
    }
  }
  st.step += 1;
}

// ---------------------------------------------------------------------------
// Pair sampling from an annotated sequence
// ---------------------------------------------------------------------------

struct SampleConfig {
  real_t padding_factor = 2.0;
  int patch_size = 128;
  FeatureConfig features;
};

// Two random frames of the same target; the search patch is cropped around
// the template-frame position so the label encodes the true displacement.
inline TrainSample sample_pair(const std::vector<ImageFrame>& frames,
                               const std::vector<Rect>& rects, Rng& rng,
                               const TrainConfig& cfg,
                               const SampleConfig& sc = SampleConfig{}) {
  if (frames.size() < 2 || frames.size() != rects.size())
    throw DataError("sample_pair: need >= 2 annotated frames");
  const std::size_t ti = rng.uniform_index(frames.size());
  std::size_t si = rng.uniform_index(frames.size() - 1);
  if (si >= ti) ++si;  // distinct frames

  const Rect& tz = rects[ti];
  const Rect& tx = rects[si];
  const real_t side = std::max(tz.w, tz.h) * (1.0 + sc.padding_factor);
  const real_t cells_per_px = static_cast<real_t>(sc.patch_size) / side /
                              sc.features.cell_size;

  TrainSample s;
  ImageFrame zp = extract_patch(frames[ti], tz, sc.padding_factor, sc.patch_size);
  ImageFrame xp = extract_patch_side(frames[si], tz.cx(), tz.cy(), side, sc.patch_size);
  s.z_pyr = compute_features(zp, sc.features);
  s.x_pyr = compute_features(xp, sc.features);

  s.target_cells = Rect{0, 0, tz.w * cells_per_px, tz.h * cells_per_px};
  const int cells = sc.patch_size / sc.features.cell_size;
  const real_t sigma =
      cfg.label_sigma_factor * std::sqrt(s.target_cells.w * s.target_cells.h);
  const real_t dx = (tx.cx() - tz.cx()) * cells_per_px;
  const real_t dy = (tx.cy() - tz.cy()) * cells_per_px;
  s.label = gaussian_label(cells, cells, std::max(sigma, 0.5),
                           static_cast<int>(std::lround(dx)),
                           static_cast<int>(std::lround(dy)));
  return s;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

struct TrainLogEntry {
  long step = 0;
  real_t lr = 0.0;
  real_t loss = 0.0;
  real_t grad_norm = 0.0;
};

// One batched step: average gradients over cfg.batch sampled pairs, clip,
// apply SGD. Returns the mean loss.
inline TrainLogEntry train_step(AttentionParams& params,
                                const std::vector<ImageFrame>& frames,
                                const std::vector<Rect>& rects, SgdState& st,
                                const TrainConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(static_cast<std::uint64_t>(st.step));
  AttentionParams grads = zero_grads(params);
  real_t loss = 0.0;
  for (int b = 0; b < cfg.batch; ++b) {
    TrainSample sample = sample_pair(frames, rects, rng, cfg);
    GraphCache gc;
    loss += forward_loss(params, sample, cfg, &gc);
    GradientSet gs = backward(params, gc);
    std::vector<ParamRef> dst = param_list(grads);
    std::vector<ParamRef> src = param_list(gs.d_params);
    for (std::size_t i = 0; i < dst.size(); ++i) detail::axpy(*dst[i].v, *src[i].v);
  }
  const real_t inv = 1.0 / cfg.batch;
  for (ParamRef& r : param_list(grads))
    for (real_t& g : *r.v) g *= inv;
  loss *= inv;
  if (!std::isfinite(loss)) throw TrainingError("train_step: non-finite loss");

  TrainLogEntry e;
  e.step = st.step;
  e.lr = learning_rate(cfg, st.step);
  e.loss = loss;
  e.grad_norm = clip_gradients(grads, cfg.clip_norm);
  sgd_step(params, grads, st, cfg);
  return e;
}

inline void write_train_log(const std::vector<TrainLogEntry>& log,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write");
  out << "step,lr,loss,grad_norm\n";
  out.precision(12);
  for (const TrainLogEntry& e : log)
    out << e.step << "," << e.lr << "," << e.loss << "," << e.grad_norm << "\n";
}

// ---------------------------------------------------------------------------
// Checkpoints: parameter vectors as RAFT tensors, in for_each_param order
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<Tensor3> params_to_tensors(AttentionParams& p) {
  std::vector<Tensor3> out;
  for (ParamRef& r : param_list(p)) {
    Tensor3 t(static_cast<int>(r.v->size()), 1, 1);
    for (std::size_t i = 0; i < r.v->size(); ++i) t[i] = (*r.v)[i];
    out.push_back(std::move(t));
  }
  return out;
}

inline void tensors_to_params(const std::vector<Tensor3>& ts, AttentionParams& p,
                              const std::string& path) {
  std::vector<ParamRef> refs = param_list(p);
  if (ts.size() != refs.size())
    throw ParseError(path + ": checkpoint has " + std::to_string(ts.size()) +
                     " tensors, expected " + std::to_string(refs.size()));
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (ts[i].size() != refs[i].v->size())
      throw ParseError(path + ": size mismatch for " + refs[i].name);
    for (std::size_t k = 0; k < ts[i].size(); ++k) (*refs[i].v)[k] = ts[i][k];
  }
}

}  // namespace detail

// Writes prefix.raft (parameters), prefix.sgd.raft (momentum) and
// prefix.json (shape manifest + step counter).
inline void save_checkpoint(AttentionParams& params, SgdState& st,
                            const std::string& prefix) {
  raft::save(detail::params_to_tensors(params), prefix + ".raft");
  raft::save(detail::params_to_tensors(st.velocity), prefix + ".sgd.raft");
  std::ofstream out(prefix + ".json");
  if (!out) throw DataError(prefix + ".json: cannot write");
  out << "{\n"
      << "  \"format\": \"rar-checkpoint\",\n"
      << "  \"version\": 1,\n"
      << "  \"step\": " << st.step << ",\n"
      << "  \"levels\": " << params.levels.size() << ",\n"
      << "  \"channels\": " << params.channels << ",\n"
      << "  \"out_channels\": " << params.out_channels << ",\n"
      << "  \"reduction\": " << params.reduction << ",\n"
      << "  \"shared_lstm\": "
      << (params.levels.empty() || !params.levels[0].lstm.shared_weights ? "false"
                                                                         : "true")
      << "\n}\n";
}

struct CheckpointMeta {
  long step = 0;
  int levels = 0, channels = 0, out_channels = 0, reduction = 4;
  bool shared_lstm = false;
};

inline CheckpointMeta load_checkpoint_meta(const std::string& prefix);

inline void load_checkpoint(AttentionParams& params, SgdState* st,
                            const std::string& prefix) {
  detail::tensors_to_params(raft::load(prefix + ".raft"), params, prefix + ".raft");
  if (st) {
    st->velocity = zero_grads(params);
    detail::tensors_to_params(raft::load(prefix + ".sgd.raft"), st->velocity,
                              prefix + ".sgd.raft");
    st->step = load_checkpoint_meta(prefix).step;
  }
}

// Minimal manifest read; full JSON handling lives in the CLI.
inline CheckpointMeta load_checkpoint_meta(const std::string& prefix) {
  std::ifstream in(prefix + ".json");
  if (!in) throw ParseError(prefix + ".json: cannot open");
  CheckpointMeta m;
  std::string tok;
  auto grab = [&](const std::string& key, const std::string& line) -> std::string {
    auto pos = line.find("\"" + key + "\"");
    if (pos == std::string::npos) return "";
    pos = line.find(':', pos);
    if (pos == std::string::npos) return "";
    std::string v = line.substr(pos + 1);
    while (!v.empty() && (v.back() == ',' || v.back() == '\r' || v.back() == ' '))
      v.pop_back();
    while (!v.empty() && v.front() == ' ') v.erase(v.begin());
    return v;
  };
  std::string line;
  while (std::getline(in, line)) {
    std::string v;
    if (!(v = grab("step", line)).empty()) m.step = std::stol(v);
    if (!(v = grab("levels", line)).empty()) m.levels = std::stoi(v);
    if (!(v = grab("channels", line)).empty()) m.channels = std::stoi(v);
    if (!(v = grab("out_channels", line)).empty()) m.out_channels = std::stoi(v);
    if (!(v = grab("reduction", line)).empty()) m.reduction = std::stoi(v);
    if (!(v = grab("shared_lstm", line)).empty()) m.shared_lstm = v == "true";
  }
  return m;
}

}  // namespace rar
