#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/ops.hpp"
#include "rar/rng.hpp"
#include "rar/tensor.hpp"

namespace rar {

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

// Conv-LSTM gate kernels, order: forget, input, output, content.
// With shared_weights the single kernel pair [0] drives all four gates,
// matching the stacked notation some formulations use; distinct per-gate
// kernels are the default.
struct ConvLstmParams {
  std::vector<ConvKernels> wi;  // input path, 4 entries
  std::vector<ConvKernels> wh;  // hidden path, 4 entries
  bool shared_weights = false;

  ConvLstmParams() = default;
  ConvLstmParams(int channels, int ksize, bool shared = false)
      : shared_weights(shared) {
    for (int g = 0; g < 4; ++g) {
      wi.emplace_back(ksize, channels, channels);
      wh.emplace_back(ksize, channels, channels);
    }
  }

  const ConvKernels& gate_wi(int g) const { return shared_weights ? wi[0] : wi[g]; }
  const ConvKernels& gate_wh(int g) const { return shared_weights ? wh[0] : wh[g]; }
  ConvKernels& gate_wi_mut(int g) { return shared_weights ? wi[0] : wi[g]; }
  ConvKernels& gate_wh_mut(int g) { return shared_weights ? wh[0] : wh[g]; }
};

struct ConvLstmState {
  Tensor3 h;
  Tensor3 c;
  long frame_index = 0;

  ConvLstmState() = default;
  ConvLstmState(int w, int hgt, int ch) : h(w, hgt, ch), c(w, hgt, ch) {}
};

// 1x1 projections deriving the channel/spatial gate vectors from h_t.
struct GateProjParams {
  ConvKernels w_hc;  // C -> C on the globally pooled vector
  ConvKernels w_hs;  // C -> 1 on the full map

  GateProjParams() = default;
  explicit GateProjParams(int channels)
      : w_hc(1, channels, channels), w_hs(1, channels, 1) {}
};

struct GateProjections {
  Tensor3 hc;  // 1 x 1 x C, sigmoid outputs
  Tensor3 hs;  // W x H x 1, sigmoid outputs
};

// Two-layer MLP with tanh bottleneck and sigmoid output, realized as 1x1
// convolutions so one struct serves both the channel and spatial branches.
struct AttnMlpParams {
  ConvKernels w_phi;  // descriptor -> bottleneck
  ConvKernels w_h;    // gate input -> bottleneck
  ConvKernels w_o;    // bottleneck -> output

  AttnMlpParams() = default;
  AttnMlpParams(int in_ch, int bottleneck, int out_ch)
      : w_phi(1, in_ch, bottleneck), w_h(1, in_ch, bottleneck),
        w_o(1, bottleneck, out_ch) {}
};

struct RefineParams {
  std::vector<ConvKernels> merge;  // levels - 1 entries, 3x3, C -> C
  ConvKernels proj;                // 1x1, C -> C_out

  RefineParams() = default;
  RefineParams(int channels, int out_channels, int levels) {
    for (int i = 0; i < levels - 1; ++i) merge.emplace_back(3, channels, channels);
    proj = ConvKernels(1, channels, out_channels);
  }
};

struct LevelAttentionParams {
  ConvLstmParams lstm;
  GateProjParams proj;
  AttnMlpParams channel;
  AttnMlpParams spatial;
};

inline int channel_bottleneck(int channels, int reduction) {
  return std::max(channels / reduction, 4);
}

struct AttentionParams {
  std::vector<LevelAttentionParams> levels;
  RefineParams refine;
  int channels = 0;
  int out_channels = 0;
  int reduction = 4;

  AttentionParams() = default;
  AttentionParams(int n_levels, int ch, int out_ch, int red = 4,
                  bool shared_lstm = false)
      : channels(ch), out_channels(out_ch), reduction(red) {
    const int b = channel_bottleneck(ch, red);
    for (int i = 0; i < n_levels; ++i) {
      LevelAttentionParams lp;
      lp.lstm = ConvLstmParams(ch, 3, shared_lstm);
      lp.proj = GateProjParams(ch);
      lp.channel = AttnMlpParams(ch, b, ch);
      lp.spatial = AttnMlpParams(1, b, 1);
      levels.push_back(std::move(lp));
    }
    refine = RefineParams(ch, out_ch, n_levels);
  }
};

// Visits every parameter vector with a stable name; used by init, SGD,
// checkpointing and the gradient checker.
inline void for_each_param(AttentionParams& p,
                           const std::function<void(const std::string&, std::vector<real_t>&,
                                                    int /*fan_in*/, int /*fan_out*/)>& fn) {
  static const char* gate_names[4] = {"f", "i", "o", "c"};
  for (std::size_t li = 0; li < p.levels.size(); ++li) {
    LevelAttentionParams& lp = p.levels[li];
    const std::string pre = "level" + std::to_string(li) + ".";
    const int ngates = lp.lstm.shared_weights ? 1 : 4;
    for (int g = 0; g < ngates; ++g) {
      auto visit = [&](const char* path, ConvKernels& k) {
        const int fi = k.in_ch * k.ksize * k.ksize;
        const int fo = k.out_ch * k.ksize * k.ksize;
        fn(pre + "lstm." + path + "." + gate_names[g] + ".w", k.w, fi, fo);
        fn(pre + "lstm." + path + "." + gate_names[g] + ".b", k.bias, fi, fo);
      };
      visit("wi", lp.lstm.wi[g]);
      visit("wh", lp.lstm.wh[g]);
    }
    auto visit_k = [&](const std::string& name, ConvKernels& k) {
      const int fi = k.in_ch * k.ksize * k.ksize;
      const int fo = k.out_ch * k.ksize * k.ksize;
      fn(pre + name + ".w", k.w, fi, fo);
      fn(pre + name + ".b", k.bias, fi, fo);
    };
    visit_k("proj.w_hc", lp.proj.w_hc);
    visit_k("proj.w_hs", lp.proj.w_hs);
    visit_k("channel.w_phi", lp.channel.w_phi);
    visit_k("channel.w_h", lp.channel.w_h);
    visit_k("channel.w_o", lp.channel.w_o);
    visit_k("spatial.w_phi", lp.spatial.w_phi);
    visit_k("spatial.w_h", lp.spatial.w_h);
    visit_k("spatial.w_o", lp.spatial.w_o);
  }
  for (std::size_t mi = 0; mi < p.refine.merge.size(); ++mi) {
    ConvKernels& k = p.refine.merge[mi];
    const int fi = k.in_ch * k.ksize * k.ksize;
    const int fo = k.out_ch * k.ksize * k.ksize;
    fn("refine.merge" + std::to_string(mi) + ".w", k.w, fi, fo);
    fn("refine.merge" + std::to_string(mi) + ".b", k.bias, fi, fo);
  }
  {
    ConvKernels& k = p.refine.proj;
    const int fi = k.in_ch, fo = k.out_ch;
    fn("refine.proj.w", k.w, fi, fo);
    fn("refine.proj.b", k.bias, fi, fo);
  }
}

// Xavier-uniform weights, zero biases, forget-gate bias offset (default +1).
inline void init_params(AttentionParams& p, Rng& rng,
                        real_t forget_bias = 1.0) {
  for_each_param(p, [&](const std::string& name, std::vector<real_t>& v,
                        int fan_in, int fan_out) {
    const bool is_bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    if (is_bias) {
      std::fill(v.begin(), v.end(), 0.0);
      if (name.find("lstm.wi.f.") != std::string::npos)
        std::fill(v.begin(), v.end(), forget_bias);
      return;
    }
    const real_t bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (real_t& x : v) x = rng.uniform(-bound, bound);
  });
}

// ---------------------------------------------------------------------------
// Forward passes with caches, and their adjoints
// ---------------------------------------------------------------------------

struct LstmCache {
  Tensor3 phi, h_prev, c_prev;
  Tensor3 f, i, o, cc, c;
};

inline ConvLstmState lstm_step(const ConvLstmState& prev, const Tensor3& phi,
                               const ConvLstmParams& p, LstmCache* cache = nullptr) {
  require_same_shape(prev.h, phi, "lstm_step");
  Tensor3 pre[4];
  for (int g = 0; g < 4; ++g)
    pre[g] = conv2d_same(prev.h, p.gate_wh(g)) + conv2d_same(phi, p.gate_wi(g));
  ConvLstmState next(phi.width(), phi.height(), phi.channels());
  next.frame_index = prev.frame_index + 1;
  Tensor3 f = pre[0], i = pre[1], o = pre[2], cc = pre[3];
  for (std::size_t k = 0; k < f.size(); ++k) {
    f[k] = sigmoid(f[k]);
    i[k] = sigmoid(i[k]);
    o[k] = sigmoid(o[k]);
    cc[k] = std::tanh(cc[k]);
    next.c[k] = f[k] * prev.c[k] + i[k] * cc[k];
    next.h[k] = o[k] * std::tanh(next.c[k]);
  }
  if (cache) {
    cache->phi = phi;
    cache->h_prev = prev.h;
    cache->c_prev = prev.c;
    cache->f = f;
    cache->i = i;
    cache->o = o;
    cache->cc = cc;
    cache->c = next.c;
  }
  return next;
}

struct ConvLstmGrads {
  std::vector<ConvKernels> wi, wh;  // always 4 slots; shared mode folds into [0]
};

inline void lstm_step_backward(const Tensor3& grad_h, const LstmCache& cache,
                               const ConvLstmParams& p, Tensor3* grad_phi,
                               Tensor3* grad_h_prev, ConvLstmGrads* grads) {
  const std::size_t n = grad_h.size();
  Tensor3 d_pre[4];
  Tensor3 dc(grad_h.width(), grad_h.height(), grad_h.channels());
  for (int g = 0; g < 4; ++g) d_pre[g] = dc;
  for (std::size_t k = 0; k < n; ++k) {
    const real_t tc = std::tanh(cache.c[k]);
    const real_t d_o = grad_h[k] * tc;
    const real_t d_c = grad_h[k] * cache.o[k] * (1.0 - tc * tc);
    const real_t d_f = d_c * cache.c_prev[k];
    const real_t d_i = d_c * cache.cc[k];
    const real_t d_cc = d_c * cache.i[k];
    d_pre[0][k] = d_f * cache.f[k] * (1.0 - cache.f[k]);
    d_pre[1][k] = d_i * cache.i[k] * (1.0 - cache.i[k]);
    d_pre[2][k] = d_o * cache.o[k] * (1.0 - cache.o[k]);
    d_pre[3][k] = d_cc * (1.0 - cache.cc[k] * cache.cc[k]);
  }
  if (grad_phi) *grad_phi = Tensor3(grad_h.width(), grad_h.height(), grad_h.channels());
  if (grad_h_prev) *grad_h_prev = Tensor3(grad_h.width(), grad_h.height(), grad_h.channels());
  if (grads && grads->wi.empty()) {
    for (int g = 0; g < 4; ++g) {
      grads->wi.emplace_back(p.gate_wi(g).ksize, p.gate_wi(g).in_ch, p.gate_wi(g).out_ch);
      grads->wh.emplace_back(p.gate_wh(g).ksize, p.gate_wh(g).in_ch, p.gate_wh(g).out_ch);
    }
  }
  for (int g = 0; g < 4; ++g) {
    Tensor3 gi, gh;
    ConvKernels kwi, kwh;
    conv2d_same_backward(d_pre[g], cache.phi, p.gate_wi(g), grad_phi ? &gi : nullptr,
                         grads ? &kwi : nullptr);
    conv2d_same_backward(d_pre[g], cache.h_prev, p.gate_wh(g),
                         grad_h_prev ? &gh : nullptr, grads ? &kwh : nullptr);
    if (grad_phi)
      for (std::size_t k = 0; k < n; ++k) (*grad_phi)[k] += gi[k];
    if (grad_h_prev)
      for (std::size_t k = 0; k < n; ++k) (*grad_h_prev)[k] += gh[k];
    if (grads) {
      const int slot = p.shared_weights ? 0 : g;
      for (std::size_t k = 0; k < kwi.w.size(); ++k) grads->wi[slot].w[k] += kwi.w[k];
      for (std::size_t k = 0; k < kwi.bias.size(); ++k) grads->wi[slot].bias[k] += kwi.bias[k];
      for (std::size_t k = 0; k < kwh.w.size(); ++k) grads->wh[slot].w[k] += kwh.w[k];
      for (std::size_t k = 0; k < kwh.bias.size(); ++k) grads->wh[slot].bias[k] += kwh.bias[k];
    }
  }
}

struct GateProjCache {
  Tensor3 h;       // input hidden map
  Tensor3 pooled;  // 1 x 1 x C global average
  Tensor3 hc, hs;  // sigmoid outputs
};

inline GateProjections project_gates(const ConvLstmState& state,
                                     const GateProjParams& p,
                                     GateProjCache* cache = nullptr) {
  Tensor3 pooled = pool(state.h, PoolAxis::Spatial, PoolKind::Avg);
  Tensor3 hc = conv2d_same(pooled, p.w_hc);
  Tensor3 hs = conv2d_same(state.h, p.w_hs);
  for (std::size_t k = 0; k < hc.size(); ++k) hc[k] = sigmoid(hc[k]);
  for (std::size_t k = 0; k < hs.size(); ++k) hs[k] = sigmoid(hs[k]);
  if (cache) {
    cache->h = state.h;
    cache->pooled = pooled;
    cache->hc = hc;
    cache->hs = hs;
  }
  return {hc, hs};
}

struct GateProjGrads {
  ConvKernels w_hc, w_hs;
};

inline void project_gates_backward(const Tensor3& grad_hc, const Tensor3& grad_hs,
                                   const GateProjCache& cache, const GateProjParams& p,
                                   Tensor3* grad_h, GateProjGrads* grads) {
  Tensor3 d_hc_pre = grad_hc;
  for (std::size_t k = 0; k < d_hc_pre.size(); ++k)
    d_hc_pre[k] *= cache.hc[k] * (1.0 - cache.hc[k]);
  Tensor3 d_hs_pre = grad_hs;
  for (std::size_t k = 0; k < d_hs_pre.size(); ++k)
    d_hs_pre[k] *= cache.hs[k] * (1.0 - cache.hs[k]);

  Tensor3 d_pooled;
  ConvKernels g_hc, g_hs;
  conv2d_same_backward(d_hc_pre, cache.pooled, p.w_hc, &d_pooled,
                       grads ? &g_hc : nullptr);
  Tensor3 d_h_from_hs;
  conv2d_same_backward(d_hs_pre, cache.h, p.w_hs, grad_h ? &d_h_from_hs : nullptr,
                       grads ? &g_hs : nullptr);
  if (grad_h) {
    *grad_h = pool_backward(d_pooled, cache.h, PoolAxis::Spatial, PoolKind::Avg);
    for (std::size_t k = 0; k < grad_h->size(); ++k) (*grad_h)[k] += d_h_from_hs[k];
  }
  if (grads) {
    grads->w_hc = g_hc;
    grads->w_hs = g_hs;
  }
}

// Shared machinery for the channel and spatial attention branches; the axis
// decides which pooling collapses the descriptor.
struct AttnMlpCache {
  Tensor3 phi;
  Tensor3 gate_in;               // hc_prev or hs_curr
  Tensor3 desc;                  // avg + max pooled descriptor
  std::vector<std::size_t> argmax;
  Tensor3 theta;                 // tanh bottleneck activations
  Tensor3 psi;                   // sigmoid outputs
};

namespace detail {

inline Tensor3 attn_mlp_forward(const Tensor3& phi, const Tensor3& gate_in,
                                const AttnMlpParams& p, PoolAxis axis,
                                AttnMlpCache* cache) {
  std::vector<std::size_t> argmax;
  Tensor3 avg = pool(phi, axis, PoolKind::Avg);
  Tensor3 mx = pool(phi, axis, PoolKind::Max, &argmax);
  Tensor3 desc = avg + mx;
  Tensor3 theta = conv2d_same(desc, p.w_phi) + conv2d_same(gate_in, p.w_h);
  for (std::size_t k = 0; k < theta.size(); ++k) theta[k] = std::tanh(theta[k]);
  Tensor3 psi = conv2d_same(theta, p.w_o);
  for (std::size_t k = 0; k < psi.size(); ++k) psi[k] = sigmoid(psi[k]);
  if (cache) {
    cache->phi = phi;
    cache->gate_in = gate_in;
    cache->desc = desc;
    cache->argmax = std::move(argmax);
    cache->theta = theta;
    cache->psi = psi;
  }
  return psi;
}

struct AttnMlpGrads {
  ConvKernels w_phi, w_h, w_o;
};

inline void attn_mlp_backward(const Tensor3& grad_psi, const AttnMlpCache& cache,
                              const AttnMlpParams& p, PoolAxis axis,
                              Tensor3* grad_phi, Tensor3* grad_gate_in,
                              AttnMlpGrads* grads) {
  Tensor3 d_pre = grad_psi;
  for (std::size_t k = 0; k < d_pre.size(); ++k)
    d_pre[k] *= cache.psi[k] * (1.0 - cache.psi[k]);
  Tensor3 d_theta;
  ConvKernels g_o;
  conv2d_same_backward(d_pre, cache.theta, p.w_o, &d_theta, grads ? &g_o : nullptr);
  for (std::size_t k = 0; k < d_theta.size(); ++k)
    d_theta[k] *= 1.0 - cache.theta[k] * cache.theta[k];
  Tensor3 d_desc;
  ConvKernels g_phi;
  conv2d_same_backward(d_theta, cache.desc, p.w_phi, &d_desc, grads ? &g_phi : nullptr);
  ConvKernels g_h;
  Tensor3 d_gate;
  conv2d_same_backward(d_theta, cache.gate_in, p.w_h,
                       grad_gate_in ? &d_gate : nullptr, grads ? &g_h : nullptr);
  if (grad_gate_in) *grad_gate_in = d_gate;
  if (grad_phi) {
    *grad_phi = pool_backward(d_desc, cache.phi, axis, PoolKind::Avg);
    Tensor3 mx_grad = pool_backward(d_desc, cache.phi, axis, PoolKind::Max, cache.argmax);
    for (std::size_t k = 0; k < grad_phi->size(); ++k) (*grad_phi)[k] += mx_grad[k];
  }
  if (grads) {
    grads->w_phi = g_phi;
    grads->w_h = g_h;
    grads->w_o = g_o;
  }
}

}  // namespace detail

// Psi_c in (0,1)^{1x1xC}; hc_prev is the channel gate projection from the
// previous frame (first frame: the current one).
inline Tensor3 channel_attention(const Tensor3& phi, const Tensor3& hc_prev,
                                 const AttnMlpParams& p, AttnMlpCache* cache = nullptr) {
  if (hc_prev.channels() != phi.channels() || hc_prev.width() != 1 || hc_prev.height() != 1)
    throw DimensionError("channel_attention: hc_prev must be 1x1xC");
  return detail::attn_mlp_forward(phi, hc_prev, p, PoolAxis::Spatial, cache);
}

// Psi_s in (0,1)^{WxHx1}; hs_curr is derived from the current frame's h_t.
inline Tensor3 spatial_attention(const Tensor3& phi, const Tensor3& hs_curr,
                                 const AttnMlpParams& p, AttnMlpCache* cache = nullptr) {
  if (hs_curr.channels() != 1 || hs_curr.width() != phi.width() ||
      hs_curr.height() != phi.height())
    throw DimensionError("spatial_attention: hs_curr must be WxHx1");
  return detail::attn_mlp_forward(phi, hs_curr, p, PoolAxis::Channel, cache);
}

// phi_a = phi * Psi_s(x,y) * Psi_c(ch) + phi.
inline Tensor3 reinforce(const Tensor3& phi, const Tensor3& psi_c,
                         const Tensor3& psi_s) {
  if (psi_c.width() != 1 || psi_c.height() != 1 || psi_c.channels() != phi.channels())
    throw DimensionError("reinforce: psi_c must be 1x1xC");
  if (psi_s.channels() != 1 || psi_s.width() != phi.width() ||
      psi_s.height() != phi.height())
    throw DimensionError("reinforce: psi_s must be WxHx1");
  Tensor3 out = phi;
  for (int ch = 0; ch < phi.channels(); ++ch) {
    const real_t pc = psi_c.at(0, 0, ch);
    for (int y = 0; y < phi.height(); ++y)
      for (int x = 0; x < phi.width(); ++x)
        out.at(x, y, ch) = phi.at(x, y, ch) * (1.0 + psi_s.at(x, y, 0) * pc);
  }
  return out;
}

inline void reinforce_backward(const Tensor3& grad_out, const Tensor3& phi,
                               const Tensor3& psi_c, const Tensor3& psi_s,
                               Tensor3* grad_phi, Tensor3* grad_psi_c,
                               Tensor3* grad_psi_s) {
  if (grad_phi) *grad_phi = Tensor3(phi.width(), phi.height(), phi.channels());
  if (grad_psi_c) *grad_psi_c = Tensor3(1, 1, phi.channels());
  if (grad_psi_s) *grad_psi_s = Tensor3(phi.width(), phi.height(), 1);
  for (int ch = 0; ch < phi.channels(); ++ch) {
    const real_t pc = psi_c.at(0, 0, ch);
    for (int y = 0; y < phi.height(); ++y)
      for (int x = 0; x < phi.width(); ++x) {
        const real_t g = grad_out.at(x, y, ch);
        const real_t ps = psi_s.at(x, y, 0);
        if (grad_phi) grad_phi->at(x, y, ch) += g * (1.0 + ps * pc);
        if (grad_psi_c) grad_psi_c->at(0, 0, ch) += g * phi.at(x, y, ch) * ps;
        if (grad_psi_s) grad_psi_s->at(x, y, 0) += g * phi.at(x, y, ch) * pc;
      }
  }
}

// Coarse-to-fine stacked merge: r2 = conv(l2), r1 = conv(l1 + r2),
// out = proj(l0 + r1).
struct RefineCache {
  std::vector<Tensor3> sums;  // inputs to each convolution, coarse first
};

inline Tensor3 refine(const std::vector<Tensor3>& levels, const RefineParams& p,
                      RefineCache* cache = nullptr) {
  if (levels.size() != p.merge.size() + 1)
    throw ConfigError("refine: expected " + std::to_string(p.merge.size() + 1) +
                      " levels, got " + std::to_string(levels.size()));
  for (std::size_t i = 1; i < levels.size(); ++i)
    require_same_shape(levels[0], levels[i], "refine");
  if (cache) cache->sums.clear();
  const int n = static_cast<int>(levels.size());
  Tensor3 carry = levels[n - 1];
  for (int li = n - 1; li >= 1; --li) {
    if (cache) cache->sums.push_back(carry);
    Tensor3 r = conv2d_same(carry, p.merge[static_cast<std::size_t>(n - 1 - li)]);
    carry = levels[li - 1] + r;
  }
  if (cache) cache->sums.push_back(carry);
  return conv2d_same(carry, p.proj);
}

struct RefineGrads {
  std::vector<ConvKernels> merge;
  ConvKernels proj;
};

inline void refine_backward(const Tensor3& grad_out, const RefineCache& cache,
                            const RefineParams& p, std::vector<Tensor3>* grad_levels,
                            RefineGrads* grads) {
  const int n = static_cast<int>(p.merge.size()) + 1;
  if (grads) {
    grads->merge.clear();
    for (const ConvKernels& k : p.merge)
      grads->merge.emplace_back(k.ksize, k.in_ch, k.out_ch);
  }
  if (grad_levels) grad_levels->assign(n, Tensor3());
  Tensor3 d_carry;
  ConvKernels g_proj;
  conv2d_same_backward(grad_out, cache.sums.back(), p.proj, &d_carry,
                       grads ? &g_proj : nullptr);
  if (grads) grads->proj = g_proj;
  // cache.sums holds conv inputs coarse-to-fine: sums[0] = l_{n-1},
  // sums[i] = l_{n-1-i} + r; walk back down.
  for (int li = 0; li < n - 1; ++li) {
    if (grad_levels) (*grad_levels)[li] = d_carry;
    Tensor3 d_in;
    ConvKernels g_m;
    const std::size_t mi = static_cast<std::size_t>(n - 2 - li);
    conv2d_same_backward(d_carry, cache.sums[static_cast<std::size_t>(n - 2 - li)],
                         p.merge[mi], &d_in, grads ? &g_m : nullptr);
    if (grads) {
      for (std::size_t k = 0; k < g_m.w.size(); ++k) grads->merge[mi].w[k] += g_m.w[k];
      for (std::size_t k = 0; k < g_m.bias.size(); ++k) grads->merge[mi].bias[k] += g_m.bias[k];
    }
    d_carry = d_in;
  }
  if (grad_levels) (*grad_levels)[n - 1] = d_carry;
}

// ---------------------------------------------------------------------------
// One full attention pass over a level
// ---------------------------------------------------------------------------

struct LevelAttendCache {
  LstmCache lstm;
  GateProjCache proj;
  AttnMlpCache channel;
  AttnMlpCache spatial;
  Tensor3 phi, psi_c, psi_s;
  bool bootstrap_hc = false;
};

struct LevelAttendResult {
  Tensor3 phi_a;
  ConvLstmState state;
  GateProjections gates;
};

// Forward over one level: LSTM step, gate projections, intra-frame attention,
// residual reinforcement. hc_prev == nullptr bootstraps the channel gate from
// the current frame's projection (first-frame rule).
inline LevelAttendResult attend_level(const Tensor3& phi, const ConvLstmState& prev,
                                      const Tensor3* hc_prev,
                                      const LevelAttentionParams& p,
                                      LevelAttendCache* cache = nullptr) {
  LevelAttendResult res;
  res.state = lstm_step(prev, phi, p.lstm, cache ? &cache->lstm : nullptr);
  res.gates = project_gates(res.state, p.proj, cache ? &cache->proj : nullptr);
  const Tensor3& hc = hc_prev ? *hc_prev : res.gates.hc;
  Tensor3 psi_c = channel_attention(phi, hc, p.channel, cache ? &cache->channel : nullptr);
  Tensor3 psi_s = spatial_attention(phi, res.gates.hs, p.spatial,
                                    cache ? &cache->spatial : nullptr);
  res.phi_a = reinforce(phi, psi_c, psi_s);
  if (cache) {
    cache->phi = phi;
    cache->psi_c = psi_c;
    cache->psi_s = psi_s;
    cache->bootstrap_hc = hc_prev == nullptr;
  }
  return res;
}

struct LevelAttendGrads {
  ConvLstmGrads lstm;
  GateProjGrads proj;
  detail::AttnMlpGrads channel;
  detail::AttnMlpGrads spatial;
};

// Adjoint of attend_level for the single-step (training) graph: previous
// LSTM state is a constant, the channel gate is bootstrapped. Returns the
// gradient w.r.t. the raw feature map.
inline Tensor3 attend_level_backward(const Tensor3& grad_phi_a,
                                     const LevelAttendCache& cache,
                                     const LevelAttentionParams& p,
                                     LevelAttendGrads* grads) {
  Tensor3 d_phi, d_psi_c, d_psi_s;
  reinforce_backward(grad_phi_a, cache.phi, cache.psi_c, cache.psi_s, &d_phi,
                     &d_psi_c, &d_psi_s);

  Tensor3 d_phi_c, d_hc;
  detail::attn_mlp_backward(d_psi_c, cache.channel, p.channel, PoolAxis::Spatial,
                            &d_phi_c, &d_hc, grads ? &grads->channel : nullptr);
  Tensor3 d_phi_s, d_hs;
  detail::attn_mlp_backward(d_psi_s, cache.spatial, p.spatial, PoolAxis::Channel,
                            &d_phi_s, &d_hs, grads ? &grads->spatial : nullptr);
  for (std::size_t k = 0; k < d_phi.size(); ++k) d_phi[k] += d_phi_c[k] + d_phi_s[k];

  if (!cache.bootstrap_hc) {
    // The channel gate came from the previous frame; its gradient does not
    // flow through this step's projection.
    d_hc = Tensor3(1, 1, cache.phi.channels());
  }
  Tensor3 d_h;
  project_gates_backward(d_hc, d_hs, cache.proj, p.proj, &d_h,
                         grads ? &grads->proj : nullptr);
  Tensor3 d_phi_lstm;
  lstm_step_backward(d_h, cache.lstm, p.lstm, &d_phi_lstm, nullptr,
                     grads ? &grads->lstm : nullptr);
  for (std::size_t k = 0; k < d_phi.size(); ++k) d_phi[k] += d_phi_lstm[k];
  return d_phi;
}

}  // namespace rar
