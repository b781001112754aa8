// Acceptance gate: one pass/fail line per criterion, with the measured
// quantity, its tolerance, and the runtime against the budget. Exits with
// the number of failed criteria.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "rar/bench.hpp"
#include "rar/graddesc.hpp"
#include "rar/tracker.hpp"

using namespace rar;

namespace {

int g_failures = 0;

using clock_t_ = std::chrono::steady_clock;

double seconds_since(clock_t_::time_point t0) {
  return std::chrono::duration<double>(clock_t_::now() - t0).count();
}

void report(int criterion, const std::string& name, bool pass, double elapsed,
            double budget, const std::string& detail) {
  if (!pass) ++g_failures;
  std::printf("[%s] criterion %d: %s — %s (%.1fs of %.0fs budget)\n",
              pass ? "PASS" : "FAIL", criterion, name.c_str(), detail.c_str(),
              elapsed, budget);
  std::fflush(stdout);
}

FilterModel single_frame_model(const ContextSet& cs, const Spectrum& y_hat,
                               real_t l1, real_t l2) {
  FilterModel m(cs.target.width(), cs.target.height(), cs.target.channels(), l1, l2,
                1.0);
  Spectrum num, den;
  train_filter_frame(cs, y_hat, l1, l2, &num, &den);
  update_filter(m, num, den, 1.0);
  return m;
}

// --- 1: closed-form filter vs dense circulant ridge regression ---
void criterion_dcf() {
  const auto t0 = clock_t_::now();
  const real_t l1 = 1e-4, l2 = 0.1;
  real_t worst = 0.0;
  Rng rng(41);
  for (int w : {4, 8})
    for (int h : {4, 8})
      for (int c : {1, 2})
        for (int k : {0, 4}) {
          Tensor3 features = oracle::random_tensor(w, h, c, rng);
          Rect target{0, 0, w / 2.0, h / 2.0};
          ContextSet cs = make_context_set(features, target, k);
          Tensor3 label = gaussian_label(w, h, 1.0, 0, 0);
          FilterModel m = single_frame_model(cs, fft2d(label), l1, l2);

          oracle::DenseRidgeOracle dense(cs.target, cs.contexts, label, l1, l2);
          Tensor3 probe = oracle::random_tensor(w, h, c, rng);
          Tensor3 got = response(m, probe).plane;
          Tensor3 want = dense.respond(probe);
          real_t scale = 0.0, diff = 0.0;
          for (std::size_t i = 0; i < want.size(); ++i) {
            scale = std::max(scale, std::abs(want[i]));
            diff = std::max(diff, std::abs(want[i] - got[i]));
          }
          worst = std::max(worst, diff / std::max(scale, 1e-12));
        }
  const double dt = seconds_since(t0);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max relative deviation %.2e (tol 1e-5)",
                worst);
  report(1, "DCF oracle equivalence", worst < 1e-5 && dt < 10.0, dt, 10, detail);
}

// --- 2: analytic gradients vs central finite differences ---
void criterion_gradients() {
  const auto t0 = clock_t_::now();
  Rng rng(43);
  const int N = 8, C = 2;
  real_t worst_module = 0.0, worst_graph = 0.0;

  {  // correlation layer: d_x, d_z0, d_zi
    Tensor3 features = oracle::random_tensor(N, N, C, rng);
    ContextSet cs = make_context_set(features, Rect{0, 0, 4, 4}, 4);
    Tensor3 x = oracle::random_tensor(N, N, C, rng);
    Tensor3 label = gaussian_label(N, N, 1.0, 0, 0);
    auto loss = [&] { return corr_forward(cs, x, label, 1e-4, 0.1); };
    CorrCache cache;
    corr_forward(cs, x, label, 1e-4, 0.1, &cache);
    Tensor3 d_x, d_z0;
    std::vector<Tensor3> d_zi;
    corr_backward(cache, &d_x, &d_z0, &d_zi);
    worst_module = std::max(
        worst_module, oracle::gradcheck_vector(x.data(), d_x.data(), loss, 1e-5));
    worst_module = std::max(worst_module, oracle::gradcheck_vector(
                                              cs.target.data(), d_z0.data(), loss, 1e-5));
    for (std::size_t i = 0; i < cs.contexts.size(); ++i)
      worst_module = std::max(
          worst_module,
          oracle::gradcheck_vector(cs.contexts[i].data(), d_zi[i].data(), loss, 1e-5));
  }

  {  // attention level: parameters and input
    AttentionParams p(1, C, C);
    init_params(p, rng);
    Tensor3 phi = oracle::random_tensor(N, N, C, rng);
    Tensor3 wts = oracle::random_tensor(N, N, C, rng);
    ConvLstmState zero(N, N, C);
    auto loss = [&] {
      Tensor3 out = attend_level(phi, zero, nullptr, p.levels[0]).phi_a;
      real_t s = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) s += wts[i] * out[i];
      return s;
    };
    LevelAttendCache cache;
    attend_level(phi, zero, nullptr, p.levels[0], &cache);
    LevelAttendGrads lg;
    Tensor3 d_phi = attend_level_backward(wts, cache, p.levels[0], &lg);
    worst_module = std::max(
        worst_module, oracle::gradcheck_vector(phi.data(), d_phi.data(), loss, 1e-4));
    AttentionParams grads = zero_grads(p);
    rar::detail::accumulate_level(grads.levels[0], lg, false);
    std::vector<ParamRef> ps = param_list(p), gs = param_list(grads);
    for (std::size_t i = 0; i < ps.size(); ++i)
      worst_module = std::max(
          worst_module, oracle::gradcheck_vector(*ps[i].v, *gs[i].v, loss, 1e-4));
  }

  {  // full graph through the closed-form filter loss
    AttentionParams p(FeatureConfig::kLevels, C, C);
    init_params(p, rng);
    TrainSample sample;
    for (int li = 0; li < FeatureConfig::kLevels; ++li) {
      sample.z_pyr.levels.push_back(oracle::random_tensor(N, N, C, rng));
      sample.x_pyr.levels.push_back(oracle::random_tensor(N, N, C, rng));
    }
    sample.target_cells = Rect{0, 0, 4, 4};
    sample.label = gaussian_label(N, N, 1.0, 1, 0);
    TrainConfig cfg;
    cfg.context_k = 4;
    auto loss = [&] { return forward_loss(p, sample, cfg, nullptr); };
    GraphCache gc;
    forward_loss(p, sample, cfg, &gc);
    GradientSet gset = backward(p, gc);
    std::vector<ParamRef> ps = param_list(p), gs = param_list(gset.d_params);
    // Floor the relative error at a fraction of the largest gradient so that
    // finite-difference noise on near-zero entries is not scored as error.
    real_t gscale = 0.0;
    for (std::size_t i = 0; i < gs.size(); ++i)
      for (real_t v : *gs[i].v) gscale = std::max(gscale, std::abs(v));
    const real_t floor = std::max(1e-6, 1e-4 * gscale);
    for (std::size_t i = 0; i < ps.size(); ++i)
      worst_graph = std::max(
          worst_graph, oracle::gradcheck_vector(*ps[i].v, *gs[i].v, loss, 1e-4, floor));
  }

  const double dt = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "module max rel %.2e (tol 1e-4), full graph %.2e (tol 1e-3)",
                worst_module, worst_graph);
  report(2, "gradient verification",
         worst_module < 1e-4 && worst_graph < 1e-3 && dt < 60.0, dt, 60, detail);
}

// --- 3: FFT round trip, naive-DFT match, Parseval ---
void criterion_fft() {
  const auto t0 = clock_t_::now();
  Rng rng(47);
  real_t worst_rt = 0.0, worst_dft = 0.0, worst_parseval = 0.0;
  for (int n : {4, 8, 16, 32, 64}) {
    Tensor3 x = oracle::random_tensor(n, n, 1, rng);
    Spectrum X = fft2d(x);
    Tensor3 back = ifft2d(X);
    real_t scale = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) scale = std::max(scale, std::abs(x[i]));
    for (std::size_t i = 0; i < x.size(); ++i)
      worst_rt = std::max(worst_rt, std::abs(back[i] - x[i]) / scale);

    if (n <= 32) {  // naive DFT is O(n^4)
      Spectrum ref = oracle::naive_dft2d(x);
      real_t sscale = 0.0;
      for (std::size_t i = 0; i < ref.size(); ++i)
        sscale = std::max(sscale, std::abs(ref[i]));
      for (std::size_t i = 0; i < ref.size(); ++i)
        worst_dft = std::max(worst_dft, std::abs(ref[i] - X[i]) / sscale);
    }

    real_t spatial = 0.0, spectral = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) spatial += x[i] * x[i];
    for (std::size_t i = 0; i < X.size(); ++i) spectral += std::norm(X[i]);
    spectral /= static_cast<real_t>(n) * n;
    worst_parseval =
        std::max(worst_parseval, std::abs(spatial - spectral) / spatial);
  }
  const double dt = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "round trip %.2e (tol 1e-6), DFT match %.2e (tol 1e-6), "
                "Parseval %.2e (tol 1e-5)",
                worst_rt, worst_dft, worst_parseval);
  report(3, "FFT correctness",
         worst_rt < 1e-6 && worst_dft < 1e-6 && worst_parseval < 1e-5 && dt < 5.0,
         dt, 5, detail);
}

// --- 4: synthetic tracking properties ---
void criterion_tracking() {
  const auto t0 = clock_t_::now();
  FeatureConfig fc;
  AttentionParams params(FeatureConfig::kLevels, fc.channels(), fc.channels());
  Rng rng(53);
  init_params(params, rng);
  TrackerConfig tc;

  auto run = [&](SynthKind kind, SynthConfig sc) {
    SynthSequence seq = synth_sequence(kind, sc);
    TrackerState st = tracker_init(seq.frames[0], seq.spec.rects[0], tc, params);
    std::vector<Rect> traj{st.bbox};
    for (std::size_t f = 1; f < seq.frames.size(); ++f)
      traj.push_back(tracker_step(st, seq.frames[f]));
    return std::make_pair(traj, seq.spec);
  };

  SynthConfig sc;
  sc.length = 100;
  sc.dx = 2.0;
  sc.frame_w = 480;  // keep the 2 px/frame target inside the frame for 100 frames
  auto [ttraj, tspec] = run(SynthKind::kTranslate, sc);
  EvalResult tr = evaluate(ttraj, tspec);
  real_t t_iou = 0.0;
  for (std::size_t f = 0; f < ttraj.size(); ++f)
    t_iou += overlap(ttraj[f], tspec.rects[f]);
  t_iou /= ttraj.size();

  sc = SynthConfig{};
  sc.length = 60;
  sc.zoom = 1.005;
  auto [ztraj, zspec] = run(SynthKind::kZoom, sc);
  const real_t scale_ratio = ztraj.back().w / zspec.rects.back().w;

  sc = SynthConfig{};
  sc.length = 50;
  auto [straj, sspec] = run(SynthKind::kStatic, sc);
  // 1-pixel quantization bound: a 24 px box offset by one pixel on each axis
  // still overlaps with IoU (23*23)/(2*24^2 - 23*23) ~= 0.85.
  real_t s_min = 1.0;
  for (std::size_t f = 0; f < straj.size(); ++f)
    s_min = std::min(s_min, overlap(straj[f], sspec.rects[f]));

  const double dt = seconds_since(t0);
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "translate IoU %.3f (>=0.8) dp20 %.2f (=1), zoom scale ratio %.3f "
                "(1±0.1), static min IoU %.3f (>=0.85)",
                t_iou, tr.dp20, scale_ratio, s_min);
  report(4, "synthetic tracking",
         t_iou >= 0.8 && tr.dp20 == 1.0 && std::abs(scale_ratio - 1.0) <= 0.1 &&
             s_min >= 0.85 && dt < 120.0,
         dt, 120, detail);
}

// --- 5: SGD reduces the correlation loss, deterministically ---
void criterion_learning() {
  const auto t0 = clock_t_::now();
  SynthConfig sc;
  sc.length = 12;
  sc.dx = 2.0;
  SynthSequence seq = synth_sequence(SynthKind::kTranslate, sc);

  TrainConfig cfg;
  cfg.steps = 200;
  cfg.batch = 2;
  cfg.seed = 7;

  auto run = [&](int steps) {
    FeatureConfig fc;
    AttentionParams params(FeatureConfig::kLevels, fc.channels(), fc.channels());
    Rng rng(59);
    init_params(params, rng);
    SgdState st = make_sgd_state(params);
    std::vector<real_t> losses;
    for (int s = 0; s < steps; ++s)
      losses.push_back(train_step(params, seq.frames, seq.spec.rects, st, cfg).loss);
    return losses;
  };

  std::vector<real_t> losses = run(cfg.steps);
  std::vector<real_t> replay = run(10);
  bool deterministic = true;
  for (int s = 0; s < 10; ++s) deterministic = deterministic && losses[s] == replay[s];

  real_t tail = 0.0;
  for (int s = cfg.steps - 10; s < cfg.steps; ++s) tail += losses[s];
  tail /= 10.0;
  const real_t ratio = tail / losses[0];

  const double dt = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "loss %.4f -> %.4f, ratio %.3f (<= 0.5), %s", losses[0], tail,
                ratio, deterministic ? "deterministic" : "NOT deterministic");
  report(5, "learning signal", ratio <= 0.5 && deterministic && dt < 300.0, dt, 300,
         detail);
}

// --- 6: forced-neutral attention equals the attention-free tracker ---
void criterion_neutrality() {
  const auto t0 = clock_t_::now();
  SynthConfig sc;
  sc.length = 5;
  sc.dx = 1.5;
  SynthSequence seq = synth_sequence(SynthKind::kTranslate, sc);
  FeatureConfig fc;
  AttentionParams params(FeatureConfig::kLevels, fc.channels(), fc.channels());
  Rng rng(61);
  init_params(params, rng);

  TrackerConfig cn, co;
  cn.attention_mode = AttentionMode::kForcedNeutral;
  co.attention_mode = AttentionMode::kOff;
  TrackerState neutral = tracker_init(seq.frames[0], seq.spec.rects[0], cn, params);
  TrackerState off = tracker_init(seq.frames[0], seq.spec.rects[0], co, params);
  real_t worst = 0.0;
  for (std::size_t f = 1; f < seq.frames.size(); ++f) {
    tracker_step(neutral, seq.frames[f]);
    tracker_step(off, seq.frames[f]);
    for (std::size_t i = 0; i < neutral.last_response.size(); ++i)
      worst = std::max(worst, std::abs(neutral.last_response[i] -
                                       off.last_response[i]));
  }
  const double dt = seconds_since(t0);
  char detail[128];
  std::snprintf(detail, sizeof(detail), "max response deviation %.2e (tol 1e-6)",
                worst);
  report(6, "attention-neutrality ablation", worst < 1e-6 && dt < 60.0, dt, 60,
         detail);
}

// --- 7: metric fixtures ---
void criterion_metrics() {
  const auto t0 = clock_t_::now();
  bool ok = true;
  std::string note = "all fixtures exact";

  {  // perfect trajectory
    SequenceSpec spec;
    std::vector<Rect> traj;
    for (int i = 0; i < 5; ++i) {
      spec.rects.push_back(Rect{10.0 + i, 5.0, 8, 8});
      spec.image_paths.push_back("");
      traj.push_back(spec.rects.back());
    }
    EvalResult r = evaluate(traj, spec);
    if (r.dp20 != 1.0 || r.auc != 1.0) {
      ok = false;
      note = "perfect fixture not 1.0";
    }
  }

  {  // 4-frame overlap fixture {1.0, 0.5, 0.25, 0.0}
    SequenceSpec spec;
    std::vector<Rect> traj;
    for (int i = 0; i < 4; ++i) {
      spec.rects.push_back(Rect{0, 0, 4, 4});
      spec.image_paths.push_back("");
    }
    traj.push_back(Rect{0, 0, 4, 4});
    traj.push_back(Rect{4.0 / 3.0, 0, 4, 4});
    traj.push_back(Rect{2.4, 0, 4, 4});
    traj.push_back(Rect{10, 0, 4, 4});
    EvalResult r = evaluate(traj, spec);
    for (int t = 0; t < kSuccessThresholds; ++t) {
      const real_t want = t <= 5 ? 0.75 : (t <= 10 ? 0.5 : 0.25);
      if (std::abs(r.success[t] - want) > 1e-12) {
        ok = false;
        note = "overlap fixture curve mismatch at tau=" + std::to_string(t * 0.05);
      }
    }
    if (std::abs(r.auc - 9.5 / 21.0) > 1e-12) {
      ok = false;
      note = "overlap fixture auc mismatch";
    }
  }

  {  // loader: comma and tab formats parse byte-identically
    namespace fs = std::filesystem;
    for (const char* variant : {"comma", "tab"}) {
      const std::string d = std::string("/tmp/rar_acc_") + variant;
      fs::remove_all(d);
      fs::create_directories(fs::path(d) / "img");
      for (int i = 1; i <= 2; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04d.ppm", i);
        save_pnm(ImageFrame(4, 4, 90), (fs::path(d) / "img" / name).string());
      }
      std::ofstream gt(fs::path(d) / "groundtruth_rect.txt");
      gt << (variant[0] == 'c' ? "1,2.5,3,4\n5,6,7,8\n" : "1\t2.5\t3\t4\n5\t6\t7\t8\n");
    }
    SequenceSpec a = load_otb_sequence("/tmp/rar_acc_comma");
    SequenceSpec b = load_otb_sequence("/tmp/rar_acc_tab");
    for (int i = 0; i < 2; ++i)
      if (a.rects[i].x != b.rects[i].x || a.rects[i].y != b.rects[i].y ||
          a.rects[i].w != b.rects[i].w || a.rects[i].h != b.rects[i].h) {
        ok = false;
        note = "comma/tab parse mismatch";
      }
    std::filesystem::remove_all("/tmp/rar_acc_comma");
    std::filesystem::remove_all("/tmp/rar_acc_tab");
  }

  const double dt = seconds_since(t0);
  report(7, "metric fixtures", ok && dt < 10.0, dt, 10, note);
}

}  // namespace

int main() {
  criterion_dcf();
  criterion_gradients();
  criterion_fft();
  criterion_tracking();
  criterion_learning();
  criterion_neutrality();
  criterion_metrics();
  std::printf("acceptance: %s (%d of 7 criteria failed)\n",
              g_failures == 0 ? "PASS" : "FAIL", g_failures);
  return g_failures;
}
