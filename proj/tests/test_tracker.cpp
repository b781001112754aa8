#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rar/bench.hpp"
#include "rar/tracker.hpp"

using namespace rar;
using Catch::Approx;

namespace {

AttentionParams fresh_params(std::uint64_t seed) {
  FeatureConfig fc;
  AttentionParams p(FeatureConfig::kLevels, fc.channels(), fc.channels());
  Rng rng(seed);
  init_params(p, rng);
  return p;
}

TrackerConfig mode_config(AttentionMode mode) {
  TrackerConfig cfg;
  cfg.attention_mode = mode;
  return cfg;
}

std::vector<Rect> run_tracker(const SynthSequence& seq, const TrackerConfig& cfg,
                              const AttentionParams& params, int max_frames = -1) {
  const int n = max_frames < 0 ? static_cast<int>(seq.frames.size())
                               : std::min<int>(max_frames, seq.frames.size());
  TrackerState st = tracker_init(seq.frames[0], seq.spec.rects[0], cfg, params);
  std::vector<Rect> traj;
  traj.push_back(st.bbox);
  for (int f = 1; f < n; ++f) traj.push_back(tracker_step(st, seq.frames[f]));
  return traj;
}

real_t mean_iou(const std::vector<Rect>& traj, const SequenceSpec& spec) {
  real_t s = 0.0;
  for (std::size_t f = 0; f < traj.size(); ++f) s += overlap(traj[f], spec.rects[f]);
  return s / traj.size();
}

}  // namespace

TEST_CASE("tracker config validation") {
  TrackerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  SECTION("even scale count") {
    cfg.scale_count = 4;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
  }
  SECTION("scale base not expanding") {
    cfg.scale_base = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
  }
  SECTION("penalty out of range") {
    cfg.scale_penalty = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
  }
  SECTION("grid not a power of two") {
    cfg.patch_size = 120;
    CHECK_THROWS_AS(cfg.validate(), ParameterError);
  }
  SECTION("attention mode names") {
    CHECK(attention_mode_from_string("normal") == AttentionMode::kNormal);
    CHECK(attention_mode_from_string("forced_neutral") == AttentionMode::kForcedNeutral);
    CHECK(attention_mode_from_string("off") == AttentionMode::kOff);
    CHECK_THROWS_AS(attention_mode_from_string("none"), ConfigError);
  }
}

TEST_CASE("tracker_init rejects bad inputs") {
  SynthConfig sc;
  sc.length = 2;
  SynthSequence seq = synth_sequence(SynthKind::kStatic, sc);
  AttentionParams p = fresh_params(11);
  TrackerConfig cfg;
  CHECK_THROWS_AS(tracker_init(seq.frames[0], Rect{10, 10, 0.5, 8}, cfg, p),
                  ParameterError);
  AttentionParams wrong(1, 4, 4);
  CHECK_THROWS_AS(tracker_init(seq.frames[0], seq.spec.rects[0], cfg, wrong),
                  ConfigError);
  // Mismatched params are fine when attention is bypassed.
  cfg.attention_mode = AttentionMode::kOff;
  CHECK_NOTHROW(tracker_init(seq.frames[0], seq.spec.rects[0], cfg, wrong));
}

TEST_CASE("trajectory_line formats with two decimals") {
  CHECK(trajectory_line(Rect{1.0, 2.5, 3.126, 4.0}) == "1.00,2.50,3.13,4.00");
  CHECK(trajectory_line(Rect{-7.333, 0, 10, 20}) == "-7.33,0.00,10.00,20.00");
}

TEST_CASE("init + self-step keeps the target centered") {
  SynthConfig sc;
  sc.length = 3;
  SynthSequence seq = synth_sequence(SynthKind::kStatic, sc);
  AttentionParams p = fresh_params(12);
  TrackerState st = tracker_init(seq.frames[0], seq.spec.rects[0],
                                 mode_config(AttentionMode::kNormal), p);
  CHECK(st.frame_index == 1);
  const Rect before = st.bbox;
  Rect after = tracker_step(st, seq.frames[0]);
  // Worst-case localization error on a re-seen frame is one feature cell.
  const real_t cell_px = st.base_side / st.cfg.cells();
  CHECK(std::abs(after.cx() - before.cx()) <= cell_px);
  CHECK(std::abs(after.cy() - before.cy()) <= cell_px);
  CHECK(st.scale == Approx(1.0).margin(0.03));
  CHECK(st.last_confidence > 0.3);
}

TEST_CASE("static sequence: IoU stays at 1 within quantization") {
  SynthConfig sc;
  sc.length = 25;
  SynthSequence seq = synth_sequence(SynthKind::kStatic, sc);
  AttentionParams p = fresh_params(13);
  std::vector<Rect> traj = run_tracker(seq, mode_config(AttentionMode::kNormal), p);
  CHECK(mean_iou(traj, seq.spec) >= 0.9);
  CHECK(overlap(traj.back(), seq.spec.rects.back()) >= 0.85);
}

TEST_CASE("translation at 2 px/frame: mean IoU >= 0.8, dp20 = 1") {
  SynthConfig sc;
  sc.length = 40;
  sc.dx = 2.0;
  SynthSequence seq = synth_sequence(SynthKind::kTranslate, sc);
  AttentionParams p = fresh_params(14);
  std::vector<Rect> traj = run_tracker(seq, mode_config(AttentionMode::kNormal), p);
  EvalResult r = evaluate(traj, seq.spec);
  CHECK(mean_iou(traj, seq.spec) >= 0.8);
  CHECK(r.dp20 == 1.0);
}

TEST_CASE("zoom at 0.5%/frame: final scale within 10%") {
  SynthConfig sc;
  sc.length = 60;
  sc.zoom = 1.005;
  SynthSequence seq = synth_sequence(SynthKind::kZoom, sc);
  AttentionParams p = fresh_params(15);
  std::vector<Rect> traj = run_tracker(seq, mode_config(AttentionMode::kNormal), p);
  const Rect& gt = seq.spec.rects.back();
  const Rect& est = traj.back();
  CHECK(est.w / gt.w == Approx(1.0).margin(0.1));
  CHECK(est.h / gt.h == Approx(1.0).margin(0.1));
  CHECK(mean_iou(traj, seq.spec) >= 0.7);
}

TEST_CASE("neutral attention matches the attention-free path") {
  SynthConfig sc;
  sc.length = 5;
  sc.dx = 1.5;
  SynthSequence seq = synth_sequence(SynthKind::kTranslate, sc);
  AttentionParams p = fresh_params(16);
  TrackerState neutral = tracker_init(seq.frames[0], seq.spec.rects[0],
                                      mode_config(AttentionMode::kForcedNeutral), p);
  TrackerState off = tracker_init(seq.frames[0], seq.spec.rects[0],
                                  mode_config(AttentionMode::kOff), p);
  for (int f = 1; f < 5; ++f) {
    Rect rn = tracker_step(neutral, seq.frames[f]);
    Rect ro = tracker_step(off, seq.frames[f]);
    real_t max_diff = 0.0;
    REQUIRE(neutral.last_response.size() == off.last_response.size());
    for (std::size_t i = 0; i < neutral.last_response.size(); ++i)
      max_diff = std::max(max_diff, std::abs(neutral.last_response.data()[i] -
                                             off.last_response.data()[i]));
    CHECK(max_diff < 1e-6);
    CHECK(rn.x == Approx(ro.x).margin(1e-6));
    CHECK(rn.y == Approx(ro.y).margin(1e-6));
    CHECK(rn.w == Approx(ro.w).margin(1e-6));
  }
}

TEST_CASE("corrupting the frame lowers the confidence") {
  SynthConfig sc;
  sc.length = 6;
  SynthSequence seq = synth_sequence(SynthKind::kStatic, sc);
  AttentionParams p = fresh_params(17);
  TrackerState st = tracker_init(seq.frames[0], seq.spec.rects[0],
                                 mode_config(AttentionMode::kNormal), p);
  for (int f = 1; f < 4; ++f) tracker_step(st, seq.frames[f]);

  TrackerState clean = st;
  tracker_step(clean, seq.frames[4]);

  ImageFrame noise = seq.frames[4];
  Rng rng(99);
  for (auto& px : noise.pixels) px = static_cast<std::uint8_t>(rng.uniform_index(256));
  TrackerState dirty = st;
  tracker_step(dirty, noise);

  CHECK(dirty.last_confidence < clean.last_confidence);
}

TEST_CASE("tracking is deterministic") {
  SynthConfig sc;
  sc.length = 8;
  sc.dx = 2.0;
  SynthSequence seq = synth_sequence(SynthKind::kTranslate, sc);
  AttentionParams p = fresh_params(18);
  TrackerConfig cfg = mode_config(AttentionMode::kNormal);
  std::vector<Rect> a = run_tracker(seq, cfg, p);
  std::vector<Rect> b = run_tracker(seq, cfg, p);
  REQUIRE(a.size() == b.size());
  for (std::size_t f = 0; f < a.size(); ++f) {
    CHECK(a[f].x == b[f].x);
    CHECK(a[f].y == b[f].y);
    CHECK(a[f].w == b[f].w);
    CHECK(a[f].h == b[f].h);
  }
}

TEST_CASE("init works with the target near the frame border") {
  SynthConfig sc;
  sc.length = 3;
  SynthSequence seq = synth_sequence(SynthKind::kStatic, sc);
  AttentionParams p = fresh_params(19);
  Rect corner{1.0, 1.0, 20.0, 16.0};
  TrackerState st = tracker_init(seq.frames[0], corner,
                                 mode_config(AttentionMode::kNormal), p);
  CHECK_NOTHROW(tracker_step(st, seq.frames[1]));
  CHECK(std::isfinite(st.bbox.x));
  CHECK(st.bbox.w > 0.0);
}
