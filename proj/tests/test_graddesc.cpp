#include <catch2/catch_amalgamated.hpp>

#include <cstdio>

#include "oracles.hpp"
#include "rar/graddesc.hpp"

using namespace rar;
using Catch::Approx;

namespace {

ContextSet hand_context_set(const Tensor3& target, int k, Rng& rng) {
  ContextSet cs;
  cs.target = target;
  for (int i = 0; i < k; ++i) {
    cs.contexts.push_back(oracle::random_tensor(target.width(), target.height(),
                                                target.channels(), rng));
    cs.offsets.emplace_back(0, 0);
  }
  return cs;
}

// A tiny moving-square sequence for trainer tests: textured 12x12 square over
// a textured background, translating dx px/frame.
void make_sequence(int n, int dx, Rng& rng, std::vector<ImageFrame>* frames,
                   std::vector<Rect>* rects) {
  const int w = 96, h = 96;
  ImageFrame bg(w, h);
  for (auto& px : bg.pixels) px = static_cast<std::uint8_t>(rng.uniform_index(60));
  std::vector<std::uint8_t> tex(12 * 12 * 3);
  for (auto& px : tex)
    px = static_cast<std::uint8_t>(150 + rng.uniform_index(100));
  for (int f = 0; f < n; ++f) {
    ImageFrame frame = bg;
    const int ox = 20 + f * dx, oy = 40;
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 12; ++x)
        for (int c = 0; c < 3; ++c)
          frame.at(ox + x, oy + y, c) = tex[(static_cast<std::size_t>(y) * 12 + x) * 3 + c];
    frames->push_back(std::move(frame));
    rects->push_back(Rect{static_cast<real_t>(ox), static_cast<real_t>(oy), 12, 12});
  }
}

AttentionParams small_params(int levels, int ch, Rng& rng) {
  AttentionParams p(levels, ch, ch, 4);
  init_params(p, rng);
  return p;
}

}  // namespace

TEST_CASE("corr_forward loss is the quadratic residual form") {
  Rng rng(201);
  Tensor3 target = oracle::random_tensor(8, 8, 1, rng);
  ContextSet cs = hand_context_set(target, 1, rng);
  Tensor3 label = gaussian_label(8, 8, 1.0, 0, 0);
  Tensor3 probe = oracle::random_tensor(8, 8, 1, rng);
  CorrCache cache;
  real_t loss = corr_forward(cs, probe, label, 1e-4, 0.1, &cache);
  real_t want = 0.0;
  for (std::size_t i = 0; i < cache.g.size(); ++i) {
    const real_t r = cache.g[i] - label[i];
    want += r * r;
  }
  CHECK(loss == Approx(want));
  CHECK(loss >= 0.0);
  // Doubling the residual everywhere quadruples the quadratic form.
  real_t quad = 0.0;
  for (std::size_t i = 0; i < cache.g.size(); ++i) {
    const real_t r = 2.0 * (cache.g[i] - label[i]);
    quad += r * r;
  }
  CHECK(quad == Approx(4.0 * loss));
}

TEST_CASE("self-probe with no contexts has near-zero loss") {
  Rng rng(203);
  Tensor3 target = oracle::random_tensor(16, 16, 1, rng);
  ContextSet cs;
  cs.target = target;
  Tensor3 label = gaussian_label(16, 16, 1.5, 0, 0);
  real_t loss = corr_forward(cs, target, label, 1e-4, 0.0, nullptr);
  real_t scale = 0.0;
  for (std::size_t i = 0; i < label.size(); ++i) scale += label[i] * label[i];
  // Only lambda1 keeps the residual from vanishing entirely.
  CHECK(loss / scale < 1e-4);
}

TEST_CASE("corr_forward matches a dense spatial recomputation") {
  Rng rng(207);
  Tensor3 target = oracle::random_tensor(8, 8, 1, rng);
  ContextSet cs = hand_context_set(target, 1, rng);
  Tensor3 label = gaussian_label(8, 8, 1.0, 0, 0);
  Tensor3 probe = oracle::random_tensor(8, 8, 1, rng);
  real_t loss = corr_forward(cs, probe, label, 1e-4, 0.1, nullptr);

  oracle::DenseRidgeOracle dense(cs.target, cs.contexts, label, 1e-4, 0.1);
  Tensor3 g = dense.respond(probe);
  real_t want = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const real_t r = g[i] - label[i];
    want += r * r;
  }
  CHECK(std::abs(loss - want) / std::max(want, 1e-12) < 1e-6);
}

TEST_CASE("corr_backward is exactly zero at zero residual") {
  Rng rng(211);
  Tensor3 target = oracle::random_tensor(8, 8, 2, rng);
  ContextSet cs = hand_context_set(target, 2, rng);
  Tensor3 label = gaussian_label(8, 8, 1.0, 0, 0);
  Tensor3 probe = oracle::random_tensor(8, 8, 2, rng);
  CorrCache cache;
  corr_forward(cs, probe, label, 1e-4, 0.1, &cache);
  cache.label = cache.g;  // force g == y: the residual factor vanishes
  Tensor3 d_x, d_z0;
  std::vector<Tensor3> d_zi;
  corr_backward(cache, &d_x, &d_z0, &d_zi);
  CHECK(d_x.max_abs() == 0.0);
  CHECK(d_z0.max_abs() == 0.0);
  for (const Tensor3& t : d_zi) CHECK(t.max_abs() == 0.0);
}

TEST_CASE("corr_backward matches finite differences (8x8x1, k=1)") {
  Rng rng(213);
  Tensor3 target = oracle::random_tensor(8, 8, 1, rng);
  ContextSet cs = hand_context_set(target, 1, rng);
  Tensor3 label = gaussian_label(8, 8, 1.0, 0, 0);
  Tensor3 probe = oracle::random_tensor(8, 8, 1, rng);

  auto loss = [&]() { return corr_forward(cs, probe, label, 1e-4, 0.1, nullptr); };
  CorrCache cache;
  corr_forward(cs, probe, label, 1e-4, 0.1, &cache);
  Tensor3 d_x, d_z0;
  std::vector<Tensor3> d_zi;
  real_t max_imag = 0.0;
  corr_backward(cache, &d_x, &d_z0, &d_zi, &max_imag);

  CHECK(max_imag < 1e-8);
  CHECK(oracle::gradcheck_vector(probe.data(), d_x.data(), loss, 1e-5) < 1e-4);
  CHECK(oracle::gradcheck_vector(cs.target.data(), d_z0.data(), loss, 1e-5) < 1e-4);
  CHECK(oracle::gradcheck_vector(cs.contexts[0].data(), d_zi[0].data(), loss, 1e-5) <
        1e-4);
}

TEST_CASE("corr_backward matches finite differences (8x8x2, k=4)") {
  Rng rng(217);
  Tensor3 target = oracle::random_tensor(8, 8, 2, rng);
  ContextSet cs = hand_context_set(target, 4, rng);
  Tensor3 label = gaussian_label(8, 8, 1.2, 1, -1);
  Tensor3 probe = oracle::random_tensor(8, 8, 2, rng);

  auto loss = [&]() { return corr_forward(cs, probe, label, 1e-4, 0.1, nullptr); };
  CorrCache cache;
  corr_forward(cs, probe, label, 1e-4, 0.1, &cache);
  Tensor3 d_x, d_z0;
  std::vector<Tensor3> d_zi;
  corr_backward(cache, &d_x, &d_z0, &d_zi);

  CHECK(oracle::gradcheck_vector(probe.data(), d_x.data(), loss, 1e-5) < 1e-4);
  CHECK(oracle::gradcheck_vector(cs.target.data(), d_z0.data(), loss, 1e-5) < 1e-4);
  for (int i = 0; i < 4; ++i)
    CHECK(oracle::gradcheck_vector(cs.contexts[i].data(), d_zi[i].data(), loss,
                                   1e-5) < 1e-4);
}

TEST_CASE("full-graph gradients match finite differences (3 levels, 8x8, C=2)") {
  Rng rng(219);
  AttentionParams params = small_params(3, 2, rng);
  TrainSample sample;
  for (int li = 0; li < 3; ++li) {
    sample.z_pyr.levels.push_back(oracle::random_tensor(8, 8, 2, rng));
    sample.x_pyr.levels.push_back(oracle::random_tensor(8, 8, 2, rng));
  }
  sample.target_cells = Rect{2, 2, 3, 3};
  sample.label = gaussian_label(8, 8, 1.0, 1, 0);
  TrainConfig cfg;
  cfg.context_k = 4;

  auto loss = [&]() { return forward_loss(params, sample, cfg, nullptr); };
  GraphCache gc;
  forward_loss(params, sample, cfg, &gc);
  GradientSet gs = backward(params, gc);

  std::vector<ParamRef> ps = param_list(params);
  std::vector<ParamRef> grads = param_list(gs.d_params);
  REQUIRE(ps.size() == grads.size());
  real_t worst = 0.0;
  std::string worst_name;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const real_t e = oracle::gradcheck_vector(*ps[i].v, *grads[i].v, loss, 1e-3);
    if (e > worst) {
      worst = e;
      worst_name = ps[i].name;
    }
  }
  INFO("worst group: " << worst_name);
  CHECK(worst < 1e-3);
}

TEST_CASE("learning rate schedule is log-linear between endpoints") {
  TrainConfig cfg;
  cfg.lr_start = 1e-3;
  cfg.lr_end = 1e-4;
  cfg.steps = 201;
  CHECK(learning_rate(cfg, 0) == Approx(1e-3));
  CHECK(learning_rate(cfg, 200) == Approx(1e-4));
  CHECK(learning_rate(cfg, 100) == Approx(std::sqrt(1e-3 * 1e-4)));
  cfg.steps = 1;
  CHECK(learning_rate(cfg, 0) == Approx(1e-3));
}

TEST_CASE("sgd_step arithmetic") {
  Rng rng(223);
  AttentionParams p(1, 2, 2, 4);
  TrainConfig cfg;
  cfg.lr_start = cfg.lr_end = 0.1;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;

  SECTION("param 1, grad 1, lr 0.1 -> 0.9") {
    for (ParamRef& r : param_list(p)) std::fill(r.v->begin(), r.v->end(), 1.0);
    AttentionParams g = zero_grads(p);
    for (ParamRef& r : param_list(g)) std::fill(r.v->begin(), r.v->end(), 1.0);
    SgdState st = make_sgd_state(p);
    sgd_step(p, g, st, cfg);
    for (ParamRef& r : param_list(p))
      for (real_t v : *r.v) CHECK(v == Approx(0.9));
    CHECK(st.step == 1);
  }
  SECTION("zero grad with weight decay shrinks by (1 - lr wd)") {
    cfg.weight_decay = 0.5;
    for (ParamRef& r : param_list(p)) std::fill(r.v->begin(), r.v->end(), 2.0);
    AttentionParams g = zero_grads(p);
    SgdState st = make_sgd_state(p);
    sgd_step(p, g, st, cfg);
    for (ParamRef& r : param_list(p))
      for (real_t v : *r.v) CHECK(v == Approx(2.0 * (1.0 - 0.1 * 0.5)));
  }
  SECTION("momentum 0.9: second velocity is 1.9 g") {
    cfg.momentum = 0.9;
    AttentionParams g = zero_grads(p);
    for (ParamRef& r : param_list(g)) std::fill(r.v->begin(), r.v->end(), 3.0);
    SgdState st = make_sgd_state(p);
    sgd_step(p, g, st, cfg);
    sgd_step(p, g, st, cfg);
    for (ParamRef& r : param_list(st.velocity))
      for (real_t v : *r.v) CHECK(v == Approx(1.9 * 3.0));
  }
  SECTION("non-finite gradient names the parameter") {
    AttentionParams g = zero_grads(p);
    (*param_list(g)[0].v)[0] = std::nan("");
    SgdState st = make_sgd_state(p);
    CHECK_THROWS_WITH(sgd_step(p, g, st, cfg),
                      Catch::Matchers::ContainsSubstring(param_list(g)[0].name));
  }
}

TEST_CASE("gradient clipping caps the global norm") {
  AttentionParams g(1, 2, 2, 4);
  for (ParamRef& r : param_list(g)) std::fill(r.v->begin(), r.v->end(), 1.0);
  const real_t before = grad_norm(g);
  REQUIRE(before > 10.0);
  const real_t reported = clip_gradients(g, 10.0);
  CHECK(reported == Approx(before));
  CHECK(grad_norm(g) == Approx(10.0));
  // Below the cap: untouched.
  clip_gradients(g, 100.0);
  CHECK(grad_norm(g) == Approx(10.0));
}

TEST_CASE("sample_pair: labels encode the ground-truth displacement") {
  Rng data_rng(227);
  std::vector<ImageFrame> frames;
  std::vector<Rect> rects;

  SECTION("static sequence centers the label at the origin") {
    make_sequence(4, 0, data_rng, &frames, &rects);
    Rng rng(1);
    TrainConfig cfg;
    TrainSample s = sample_pair(frames, rects, rng, cfg);
    int px = 0, py = 0;
    real_t best = -1.0;
    for (int y = 0; y < s.label.height(); ++y)
      for (int x = 0; x < s.label.width(); ++x)
        if (s.label.at(x, y, 0) > best) {
          best = s.label.at(x, y, 0);
          px = x;
          py = y;
        }
    CHECK(px == 0);
    CHECK(py == 0);
  }
  SECTION("translating sequence shifts the label by the offset in cells") {
    make_sequence(2, 9, data_rng, &frames, &rects);  // 9 px/frame
    Rng rng(2);
    TrainConfig cfg;
    TrainSample s = sample_pair(frames, rects, rng, cfg);
    // side = 12 * 3 = 36 px -> 128/36 patch px per image px, /4 cells.
    const real_t cells_per_px = 128.0 / 36.0 / 4.0;
    int px = 0;
    real_t best = -1.0;
    for (int x = 0; x < s.label.width(); ++x)
      if (s.label.at(x, 0, 0) > best) {
        best = s.label.at(x, 0, 0);
        px = x;
      }
    // Template may be frame 0 or 1: displacement is +-9 px.
    const int want = static_cast<int>(std::lround(9.0 * cells_per_px));
    const int wrapped = px <= s.label.width() / 2 ? px : px - s.label.width();
    CHECK(std::abs(wrapped) == want);
  }
  SECTION("seeded rng reproduces the pair") {
    make_sequence(6, 2, data_rng, &frames, &rects);
    TrainConfig cfg;
    Rng a(3), b(3);
    TrainSample s1 = sample_pair(frames, rects, a, cfg);
    TrainSample s2 = sample_pair(frames, rects, b, cfg);
    for (std::size_t i = 0; i < s1.label.size(); ++i)
      CHECK(s1.label[i] == s2.label[i]);
    for (int li = 0; li < 3; ++li)
      for (std::size_t i = 0; i < s1.z_pyr.levels[li].size(); ++i)
        CHECK(s1.z_pyr.levels[li][i] == s2.z_pyr.levels[li][i]);
  }
  SECTION("single-frame input is rejected") {
    make_sequence(1, 0, data_rng, &frames, &rects);
    Rng rng(4);
    TrainConfig cfg;
    CHECK_THROWS_AS(sample_pair(frames, rects, rng, cfg), DataError);
  }
}

TEST_CASE("training steps are deterministic and reduce the loss") {
  Rng data_rng(229);
  std::vector<ImageFrame> frames;
  std::vector<Rect> rects;
  make_sequence(6, 2, data_rng, &frames, &rects);

  TrainConfig cfg;
  cfg.steps = 30;
  cfg.batch = 2;
  cfg.seed = 42;

  Rng init_rng(5);
  AttentionParams p1(3, FeatureConfig{}.channels(), FeatureConfig{}.channels(), 4);
  init_params(p1, init_rng);
  Rng init_rng2(5);
  AttentionParams p2(3, FeatureConfig{}.channels(), FeatureConfig{}.channels(), 4);
  init_params(p2, init_rng2);

  SgdState st1 = make_sgd_state(p1);
  SgdState st2 = make_sgd_state(p2);
  std::vector<TrainLogEntry> log1, log2;
  for (int s = 0; s < cfg.steps; ++s) log1.push_back(train_step(p1, frames, rects, st1, cfg));
  for (int s = 0; s < cfg.steps; ++s) log2.push_back(train_step(p2, frames, rects, st2, cfg));

  for (int s = 0; s < cfg.steps; ++s) CHECK(log1[s].loss == log2[s].loss);
  // Mean of the last five losses below the first loss: learning signal.
  real_t tail = 0.0;
  for (int s = cfg.steps - 5; s < cfg.steps; ++s) tail += log1[s].loss;
  tail /= 5.0;
  CHECK(tail < log1[0].loss);

  const std::string csv = "/tmp/rar_test_train.csv";
  write_train_log(log1, csv);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "step,lr,loss,grad_norm");
  std::remove(csv.c_str());
}

TEST_CASE("checkpoint round trip restores parameters, momentum and step") {
  Rng rng(233);
  AttentionParams p = small_params(2, 3, rng);
  SgdState st = make_sgd_state(p);
  st.step = 17;
  for (ParamRef& r : param_list(st.velocity))
    for (real_t& v : *r.v) v = rng.uniform(-0.5, 0.5);

  const std::string prefix = "/tmp/rar_test_ckpt";
  save_checkpoint(p, st, prefix);

  CheckpointMeta meta = load_checkpoint_meta(prefix);
  CHECK(meta.step == 17);
  CHECK(meta.levels == 2);
  CHECK(meta.channels == 3);

  AttentionParams q(2, 3, 3, 4);
  SgdState st2 = make_sgd_state(q);
  load_checkpoint(q, &st2, prefix);
  CHECK(st2.step == 17);
  std::vector<ParamRef> a = param_list(p), b = param_list(q);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].v->size(); ++k)
      CHECK((*b[i].v)[k] ==
            static_cast<real_t>(static_cast<float>((*a[i].v)[k])));
  std::vector<ParamRef> va = param_list(st.velocity), vb = param_list(st2.velocity);
  for (std::size_t i = 0; i < va.size(); ++i)
    for (std::size_t k = 0; k < va[i].v->size(); ++k)
      CHECK((*vb[i].v)[k] ==
            static_cast<real_t>(static_cast<float>((*va[i].v)[k])));

  std::remove((prefix + ".raft").c_str());
  std::remove((prefix + ".sgd.raft").c_str());
  std::remove((prefix + ".json").c_str());
}
