// Command-line entry point: track / train / eval / gradcheck / synth.
//
// Exit codes: 0 success, 1 numerical or check failure, 2 usage/config/IO
// error. Every subcommand is deterministic under a fixed seed and echoes its
// effective configuration into the output directory.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rar/bench.hpp"
#include "rar/graddesc.hpp"
#include "rar/tracker.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rar;

// ---------------------------------------------------------------------------
// Logging (RAR_LOG=quiet|info|debug or 0|1|2; default info)
// ---------------------------------------------------------------------------

static int log_level() {
  static const int lvl = [] {
    const char* v = std::getenv("RAR_LOG");
    if (!v) return 1;
    const std::string s(v);
    if (s == "quiet" || s == "0") return 0;
    if (s == "debug" || s == "2") return 2;
    return 1;
  }();
  return lvl;
}

static void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[rar] " << msg << "\n";
}

static void log_debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[rar:debug] " << msg << "\n";
}

// ---------------------------------------------------------------------------
// JSON configuration: defaults, strict unknown-key rejection, echo
// ---------------------------------------------------------------------------

static json default_config() {
  return json{
      {"seed", 1},
      {"checkpoint", ""},           // optional trained-parameter prefix
      {"attention_mode", "normal"}, // normal | forced_neutral | off
      {"tracker",
       {{"padding_factor", 2.0},
        {"scale_base", 1.02},
        {"scale_count", 3},
        {"lambda1", 1e-4},
        {"lambda2", 0.1},
        {"eta", 0.013},
        {"scale_damping", 0.6},
        {"scale_penalty", 0.97},
        {"patch_size", 128},
        {"cell_size", 4},
        {"context_k", 4},
        {"label_sigma_factor", 0.1}}},
      {"train",
       {{"lr_start", 1e-3},
        {"lr_end", 1e-4},
        {"momentum", 0.9},
        {"weight_decay", 5e-4},
        {"clip_norm", 10.0},
        {"steps", 200},
        {"batch", 8},
        {"lambda1", 1e-4},
        {"lambda2", 0.1},
        {"context_k", 4},
        {"label_sigma_factor", 0.1}}},
  };
}

static void reject_unknown_keys(const json& user, const json& defaults,
                                const std::string& prefix) {
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!defaults.contains(it.key()))
      throw ConfigError("config: unknown key '" + prefix + it.key() + "'");
    if (it->is_object()) {
      if (!defaults[it.key()].is_object())
        throw ConfigError("config: key '" + prefix + it.key() +
                          "' should be a scalar");
      reject_unknown_keys(*it, defaults[it.key()], prefix + it.key() + ".");
    }
  }
}

static json load_config(const std::string& path) {
  json cfg = default_config();
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  if (!user.is_object()) throw ConfigError(path + ": config must be an object");
  reject_unknown_keys(user, cfg, "");
  cfg.merge_patch(user);
  return cfg;
}

static void echo_config(const json& cfg, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::string path = (fs::path(out_dir) / "effective_config.json").string();
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write");
  out << cfg.dump(2) << "\n";
  log_debug("effective config echoed to " + path);
}

static TrackerConfig tracker_config(const json& cfg) {
  const json& t = cfg["tracker"];
  TrackerConfig c;
  c.padding_factor = t["padding_factor"];
  c.scale_base = t["scale_base"];
  c.scale_count = t["scale_count"];
  c.lambda1 = t["lambda1"];
  c.lambda2 = t["lambda2"];
  c.eta = t["eta"];
  c.scale_damping = t["scale_damping"];
  c.scale_penalty = t["scale_penalty"];
  c.patch_size = t["patch_size"];
  c.cell_size = t["cell_size"];
  c.context_k = t["context_k"];
  c.label_sigma_factor = t["label_sigma_factor"];
  c.attention_mode = attention_mode_from_string(cfg["attention_mode"]);
  c.validate();
  return c;
}

static TrainConfig train_config(const json& cfg) {
  const json& t = cfg["train"];
  TrainConfig c;
  c.lr_start = t["lr_start"];
  c.lr_end = t["lr_end"];
  c.momentum = t["momentum"];
  c.weight_decay = t["weight_decay"];
  c.clip_norm = t["clip_norm"];
  c.steps = t["steps"];
  c.batch = t["batch"];
  c.lambda1 = t["lambda1"];
  c.lambda2 = t["lambda2"];
  c.context_k = t["context_k"];
  c.label_sigma_factor = t["label_sigma_factor"];
  c.seed = cfg["seed"].get<std::uint64_t>();
  c.validate();
  return c;
}

// Attention parameters: load from the configured checkpoint prefix, or
// deterministically initialize from the seed.
static AttentionParams make_attention_params(const json& cfg) {
  FeatureConfig fc;
  fc.cell_size = cfg["tracker"]["cell_size"];
  AttentionParams p(FeatureConfig::kLevels, fc.channels(), fc.channels());
  const std::string ckpt = cfg["checkpoint"];
  if (!ckpt.empty()) {
    log_info("loading parameters from checkpoint prefix " + ckpt);
    load_checkpoint(p, nullptr, ckpt);
  } else {
    Rng rng(cfg["seed"].get<std::uint64_t>());
    init_params(p, rng);
  }
  return p;
}

// ---------------------------------------------------------------------------
// track
// ---------------------------------------------------------------------------

static void track_one(const std::string& seq_dir, const json& cfg,
                      const std::string& out_dir, bool dump_responses) {
  const SequenceSpec spec = load_otb_sequence(seq_dir);
  const TrackerConfig tc = tracker_config(cfg);
  const AttentionParams params = make_attention_params(cfg);

  ImageFrame first = load_image(spec.image_paths[0]);
  TrackerState st = tracker_init(first, spec.rects[0], tc, params);

  std::ofstream traj((fs::path(out_dir) / (spec.name + ".txt")).string());
  std::ofstream conf((fs::path(out_dir) / (spec.name + "_confidence.csv")).string());
  if (!traj || !conf) throw DataError(out_dir + ": cannot write results");
  conf << "frame,confidence\n";
  traj << trajectory_line(st.bbox) << "\n";
  conf << "1,1\n";  // frame 1 is the ground-truth initialization

  std::vector<Tensor3> responses;
  for (std::size_t f = 1; f < spec.image_paths.size(); ++f) {
    ImageFrame frame = load_image(spec.image_paths[f]);
    Rect r = tracker_step(st, frame);
    traj << trajectory_line(r) << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", f + 1, st.last_confidence);
    conf << buf;
    if (dump_responses) responses.push_back(st.last_response);
    log_debug(spec.name + " frame " + std::to_string(f + 1) + ": " +
              trajectory_line(r));
  }
  if (dump_responses)
    raft::save(responses, (fs::path(out_dir) / (spec.name + "_responses.raft")).string());
  log_info(spec.name + ": tracked " + std::to_string(spec.image_paths.size()) +
           " frames");
}

static int cmd_track(const std::vector<std::string>& seqs, const std::string& config,
                     const std::string& out, int jobs, bool dump_responses) {
  const json cfg = load_config(config);
  echo_config(cfg, out);
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seqs.size(); i = next.fetch_add(1)) {
      try {
        track_one(seqs[i], cfg, out, dump_responses);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(seqs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

static int cmd_train(const std::string& data, const std::string& config,
                     const std::string& out, const std::string& resume) {
  const json cfg = load_config(config);
  echo_config(cfg, out);
  const TrainConfig tc = train_config(cfg);

  const SequenceSpec spec = load_otb_sequence(data);
  std::vector<ImageFrame> frames;
  for (const std::string& p : spec.image_paths) frames.push_back(load_image(p));

  AttentionParams params = make_attention_params(cfg);
  SgdState st = make_sgd_state(params);
  if (!resume.empty()) {
    log_info("resuming from checkpoint prefix " + resume);
    load_checkpoint(params, &st, resume);
  }

  std::vector<TrainLogEntry> log;
  while (st.step < tc.steps) {
    TrainLogEntry e = train_step(params, frames, spec.rects, st, tc);
    log.push_back(e);
    if (e.step % 10 == 0)
      log_info("step " + std::to_string(e.step) + " loss " + std::to_string(e.loss) +
               " lr " + std::to_string(e.lr));
  }
  write_train_log(log, (fs::path(out) / "loss.csv").string());
  save_checkpoint(params, st, (fs::path(out) / "checkpoint").string());
  log_info("wrote loss.csv and checkpoint.* to " + out);
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

static std::vector<Rect> load_trajectory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path + ": missing results file");
  std::vector<Rect> traj;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<real_t> v = rar::detail::parse_rect_line(line, path, lineno);
    traj.push_back(Rect{v[0], v[1], v[2], v[3]});
  }
  return traj;
}

static int cmd_eval(const std::string& dataset, const std::string& results,
                    const std::string& out, int jobs) {
  std::vector<std::string> seq_dirs;
  if (!fs::is_directory(dataset))
    throw DataError(dataset + ": dataset directory does not exist");
  for (const auto& e : fs::directory_iterator(dataset))
    if (e.is_directory()) seq_dirs.push_back(e.path().string());
  std::sort(seq_dirs.begin(), seq_dirs.end());
  if (seq_dirs.empty()) throw DataError(dataset + ": no sequences found");
  fs::create_directories(out);

  struct SeqReport {
    std::string name;
    std::vector<std::string> attributes;
    EvalResult result;
  };
  std::vector<SeqReport> reports(seq_dirs.size());
  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < seq_dirs.size();
         i = next.fetch_add(1)) {
      try {
        SequenceSpec spec = load_otb_sequence(seq_dirs[i]);
        std::vector<Rect> traj =
            load_trajectory((fs::path(results) / (spec.name + ".txt")).string());
        reports[i] = {spec.name, spec.attributes, evaluate(traj, spec)};
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(jobs, static_cast<int>(seq_dirs.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  // Aggregate: mean curves over sequences, plus per-attribute means.
  EvalResult agg;
  agg.precision.assign(kPrecisionThresholds, 0.0);
  agg.success.assign(kSuccessThresholds, 0.0);
  json per_seq = json::object();
  std::map<std::string, std::pair<real_t, int>> attr_auc, attr_dp;
  for (const SeqReport& r : reports) {
    for (int t = 0; t < kPrecisionThresholds; ++t)
      agg.precision[t] += r.result.precision[t] / reports.size();
    for (int t = 0; t < kSuccessThresholds; ++t)
      agg.success[t] += r.result.success[t] / reports.size();
    per_seq[r.name] = {{"dp20", r.result.dp20},
                       {"auc", r.result.auc},
                       {"frames", r.result.frames_evaluated}};
    for (const std::string& a : r.attributes) {
      attr_auc[a].first += r.result.auc;
      attr_auc[a].second += 1;
      attr_dp[a].first += r.result.dp20;
      attr_dp[a].second += 1;
    }
  }
  agg.dp20 = agg.precision[20];
  real_t s = 0.0;
  for (real_t v : agg.success) s += v;
  agg.auc = s / kSuccessThresholds;

  json attrs = json::object();
  for (const auto& [a, v] : attr_auc)
    attrs[a] = {{"auc", v.first / v.second},
                {"dp20", attr_dp[a].first / attr_dp[a].second},
                {"sequences", v.second}};
  json report = {{"sequences", per_seq},
                 {"attributes", attrs},
                 {"aggregate", {{"dp20", agg.dp20}, {"auc", agg.auc}}}};
  {
    std::ofstream ro((fs::path(out) / "report.json").string());
    ro << report.dump(2) << "\n";
  }
  write_curves_csv(agg, (fs::path(out) / "curves.csv").string());
  write_curve_svg(agg.success, 1.0, "success", (fs::path(out) / "success.svg").string());
  write_curve_svg(agg.precision, 50.0, "precision",
                  (fs::path(out) / "precision.svg").string());
  std::cout << "sequences: " << reports.size() << " dp20: " << agg.dp20
            << " auc: " << agg.auc << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

namespace gradcheck {

struct Row {
  std::string group;
  real_t max_rel = 0.0;
  real_t threshold = 0.0;
};

// Central finite differences over a flat list of parameter locations against
// precomputed analytic gradients, under an arbitrary scalar loss closure.
// The relative-error denominator is floored at a small fraction of the
// largest gradient in the group so that near-zero components (for example
// saturated LSTM biases) do not register finite-difference noise as error.
static real_t fd_max_rel(const std::vector<real_t*>& where,
                         const std::vector<real_t>& analytic,
                         const std::function<real_t()>& loss, real_t h) {
  real_t scale = 0.0;
  for (real_t a : analytic) scale = std::max(scale, std::abs(a));
  const real_t floor = std::max(1e-6, 1e-4 * scale);
  real_t worst = 0.0;
  for (std::size_t i = 0; i < where.size(); ++i) {
    const real_t keep = *where[i];
    *where[i] = keep + h;
    const real_t lp = loss();
    *where[i] = keep - h;
    const real_t lm = loss();
    *where[i] = keep;
    const real_t fd = (lp - lm) / (2.0 * h);
    const real_t denom = std::max({std::abs(analytic[i]), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

static std::vector<real_t*> tensor_ptrs(Tensor3& t) {
  std::vector<real_t*> out;
  for (std::size_t i = 0; i < t.size(); ++i) out.push_back(&t[i]);
  return out;
}

static Tensor3 random_tensor(int w, int h, int c, Rng& rng) {
  Tensor3 t(w, h, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1.0, 1.0);
  return t;
}

static std::vector<real_t> flatten(AttentionParams& grads) {
  std::vector<real_t> out;
  for (ParamRef& r : param_list(grads))
    out.insert(out.end(), r.v->begin(), r.v->end());
  return out;
}

static std::vector<real_t*> param_ptrs(AttentionParams& p) {
  std::vector<real_t*> out;
  for (ParamRef& r : param_list(p))
    for (real_t& v : *r.v) out.push_back(&v);
  return out;
}

}  // namespace gradcheck

static int cmd_gradcheck(int size, int channels, std::uint64_t seed, bool perturb,
                         const std::string& out) {
  using namespace gradcheck;
  if (size < 2 || size > 16 || !is_power_of_two(size))
    throw ParameterError("gradcheck: size must be a power of two in [2, 16]");
  if (channels < 1) throw ParameterError("gradcheck: channels must be positive");
  if (!out.empty()) {
    echo_config(json{{"size", size},
                     {"channels", channels},
                     {"seed", seed},
                     {"perturb", perturb}},
                out);
  }
  Rng rng(seed);
  const int N = size, C = channels;
  std::vector<Row> rows;
  // Applied to the first analytic component of each group when --perturb is
  // set; proves the checker actually fails on a wrong gradient.
  auto hook = [&](std::vector<real_t>& analytic) {
    if (perturb && !analytic.empty()) analytic[0] += 0.25;
  };

  // --- correlation layer: gradients w.r.t. the three feature inputs ---
  {
    ContextSet cs;
    cs.target = random_tensor(N, N, C, rng);
    for (int i = 0; i < 4; ++i) {
      cs.contexts.push_back(random_tensor(N, N, C, rng));
      cs.offsets.emplace_back(0, 0);
    }
    Tensor3 x = random_tensor(N, N, C, rng);
    Tensor3 label = gaussian_label(N, N, 1.0, 0, 0);
    auto loss = [&] { return corr_forward(cs, x, label, 1e-4, 0.1); };
    CorrCache cache;
    corr_forward(cs, x, label, 1e-4, 0.1, &cache);
    Tensor3 d_x, d_z0;
    std::vector<Tensor3> d_zi;
    corr_backward(cache, &d_x, &d_z0, &d_zi);

    std::vector<real_t> an(d_x.data().begin(), d_x.data().end());
    hook(an);
    rows.push_back({"corr.d_x", fd_max_rel(tensor_ptrs(x), an, loss, 1e-5), 1e-4});
    an.assign(d_z0.data().begin(), d_z0.data().end());
    hook(an);
    rows.push_back(
        {"corr.d_z0", fd_max_rel(tensor_ptrs(cs.target), an, loss, 1e-5), 1e-4});
    std::vector<real_t*> where;
    an.clear();
    for (std::size_t i = 0; i < cs.contexts.size(); ++i) {
      auto p = tensor_ptrs(cs.contexts[i]);
      where.insert(where.end(), p.begin(), p.end());
      an.insert(an.end(), d_zi[i].data().begin(), d_zi[i].data().end());
    }
    hook(an);
    rows.push_back({"corr.d_zi", fd_max_rel(where, an, loss, 1e-5), 1e-4});
  }

  // --- attention level: input and parameter gradients ---
  {
    AttentionParams p(1, C, C);
    init_params(p, rng);
    Tensor3 phi = random_tensor(N, N, C, rng);
    Tensor3 w = random_tensor(N, N, C, rng);  // fixed loss weights
    ConvLstmState zero(N, N, C);
    auto loss = [&] {
      Tensor3 out_t = attend_level(phi, zero, nullptr, p.levels[0]).phi_a;
      real_t s = 0.0;
      for (std::size_t i = 0; i < out_t.size(); ++i) s += w[i] * out_t[i];
      return s;
    };
    LevelAttendCache cache;
    attend_level(phi, zero, nullptr, p.levels[0], &cache);
    LevelAttendGrads lg;
    Tensor3 d_phi = attend_level_backward(w, cache, p.levels[0], &lg);

    std::vector<real_t> an(d_phi.data().begin(), d_phi.data().end());
    hook(an);
    rows.push_back(
        {"attend.d_phi", fd_max_rel(tensor_ptrs(phi), an, loss, 1e-4), 1e-4});

    AttentionParams grads = zero_grads(p);
    rar::detail::accumulate_level(grads.levels[0], lg, false);
    an = flatten(grads);
    hook(an);
    rows.push_back(
        {"attend.params", fd_max_rel(param_ptrs(p), an, loss, 1e-4), 1e-4});
  }

  // --- refinement stack: parameter gradients ---
  {
    RefineParams rp(C, C, 3);
    {
      AttentionParams holder(3, C, C);
      Rng r2 = rng.fork(1);
      init_params(holder, r2);
      rp = holder.refine;
    }
    std::vector<Tensor3> levels;
    for (int i = 0; i < 3; ++i) levels.push_back(random_tensor(N, N, C, rng));
    Tensor3 w = random_tensor(N, N, C, rng);
    auto loss = [&] {
      Tensor3 out_t = refine(levels, rp);
      real_t s = 0.0;
      for (std::size_t i = 0; i < out_t.size(); ++i) s += w[i] * out_t[i];
      return s;
    };
    RefineCache cache;
    refine(levels, rp, &cache);
    std::vector<Tensor3> d_levels;
    RefineGrads rg;
    refine_backward(w, cache, rp, &d_levels, &rg);

    std::vector<real_t*> where;
    std::vector<real_t> an;
    for (ConvKernels& k : rp.merge) {
      for (real_t& v : k.w) where.push_back(&v);
      for (real_t& v : k.bias) where.push_back(&v);
    }
    for (real_t& v : rp.proj.w) where.push_back(&v);
    for (real_t& v : rp.proj.bias) where.push_back(&v);
    for (const ConvKernels& k : rg.merge) {
      an.insert(an.end(), k.w.begin(), k.w.end());
      an.insert(an.end(), k.bias.begin(), k.bias.end());
    }
    an.insert(an.end(), rg.proj.w.begin(), rg.proj.w.end());
    an.insert(an.end(), rg.proj.bias.begin(), rg.proj.bias.end());
    hook(an);
    rows.push_back({"refine.params", fd_max_rel(where, an, loss, 1e-5), 1e-4});

    where.clear();
    an.clear();
    for (std::size_t i = 0; i < levels.size(); ++i) {
      auto ptrs = tensor_ptrs(levels[i]);
      where.insert(where.end(), ptrs.begin(), ptrs.end());
      an.insert(an.end(), d_levels[i].data().begin(), d_levels[i].data().end());
    }
    hook(an);
    rows.push_back({"refine.d_levels", fd_max_rel(where, an, loss, 1e-5), 1e-4});
  }

  // --- full training graph: all parameters through the closed-form loss ---
  {
    AttentionParams p(FeatureConfig::kLevels, C, C);
    Rng r3 = rng.fork(2);
    init_params(p, r3);
    TrainSample sample;
    for (int li = 0; li < FeatureConfig::kLevels; ++li) {
      sample.z_pyr.levels.push_back(random_tensor(N, N, C, rng));
      sample.x_pyr.levels.push_back(random_tensor(N, N, C, rng));
    }
    sample.target_cells = Rect{0, 0, N / 2.0, N / 2.0};
    sample.label = gaussian_label(N, N, 1.0, 1, 0);
    TrainConfig tc;
    tc.lambda1 = 1e-4;
    tc.lambda2 = 0.1;
    tc.context_k = 4;
    auto loss = [&] { return forward_loss(p, sample, tc, nullptr); };
    GraphCache gc;
    forward_loss(p, sample, tc, &gc);
    GradientSet gs = backward(p, gc);
    std::vector<real_t> an = flatten(gs.d_params);
    hook(an);
    rows.push_back({"graph.params", fd_max_rel(param_ptrs(p), an, loss, 1e-4), 1e-3});
  }

  bool all_pass = true;
  std::printf("%-18s %14s %12s  %s\n", "group", "max_rel_err", "threshold", "status");
  for (const Row& r : rows) {
    const bool ok = r.max_rel < r.threshold;
    all_pass = all_pass && ok;
    std::printf("%-18s %14.6e %12.1e  %s\n", r.group.c_str(), r.max_rel, r.threshold,
                ok ? "PASS" : "FAIL");
  }
  std::printf("gradcheck: %s\n", all_pass ? "PASS" : "FAIL");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

static int cmd_synth(const std::string& kind, const std::string& out,
                     const SynthConfig& sc) {
  SynthSequence seq = synth_sequence(synth_kind_from_string(kind), sc);
  const std::string dir = (fs::path(out) / kind).string();
  write_otb_sequence(seq, dir);
  echo_config(json{{"kind", kind},
                   {"length", sc.length},
                   {"frame_w", sc.frame_w},
                   {"frame_h", sc.frame_h},
                   {"target_size", sc.target_size},
                   {"dx", sc.dx},
                   {"dy", sc.dy},
                   {"zoom", sc.zoom},
                   {"occlude_start", sc.occlude_start},
                   {"occlude_len", sc.occlude_len},
                   {"seed", sc.seed}},
              out);
  log_info("wrote " + std::to_string(seq.frames.size()) + " frames to " + dir);
  return 0;
}

// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
  CLI::App app{"rar: attentional correlation-filter tracking toolkit"};
  app.require_subcommand(1);

  // track
  auto* track = app.add_subcommand("track", "Run the tracker on OTB-layout sequences");
  std::vector<std::string> t_seqs;
  std::string t_config, t_out = "out";
  int t_jobs = 1;
  bool t_dump = false;
  track->add_option("--seq", t_seqs, "Sequence directory (repeatable)")->required();
  track->add_option("--config", t_config, "JSON config file");
  track->add_option("--out", t_out, "Output directory");
  track->add_option("--jobs", t_jobs, "Parallel sequences");
  track->add_flag("--dump-responses", t_dump, "Dump per-frame response maps (RAFT)");

  // train
  auto* train = app.add_subcommand("train", "Train attention parameters on a sequence");
  std::string tr_data, tr_config, tr_out = "out", tr_resume;
  train->add_option("--data", tr_data, "OTB-layout training sequence")->required();
  train->add_option("--config", tr_config, "JSON config file");
  train->add_option("--out", tr_out, "Output directory");
  train->add_option("--resume", tr_resume, "Checkpoint prefix to resume from");

  // eval
  auto* eval = app.add_subcommand("eval", "Score trajectories against ground truth");
  std::string e_dataset, e_results, e_out = "out";
  int e_jobs = 1;
  eval->add_option("--dataset", e_dataset, "Directory of sequence directories")
      ->required();
  eval->add_option("--results", e_results, "Directory of <name>.txt trajectories")
      ->required();
  eval->add_option("--out", e_out, "Output directory");
  eval->add_option("--jobs", e_jobs, "Parallel sequences");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
  int g_size = 8, g_channels = 4;
  std::uint64_t g_seed = 1;
  bool g_perturb = false;
  std::string g_out;
  gc->add_option("--size", g_size, "Grid size N (power of two <= 16)");
  gc->add_option("--channels", g_channels, "Feature channels");
  gc->add_option("--seed", g_seed, "Random seed");
  gc->add_option("--out", g_out, "Optional output directory for the config echo");
  gc->add_flag("--perturb", g_perturb,
               "Deliberately corrupt the analytic gradients (self-test hook)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic OTB-layout sequence");
  std::string s_kind, s_out = "out";
  SynthConfig sc;
  synth->add_option("--kind", s_kind, "static | translate | zoom | occlude")
      ->required();
  synth->add_option("--out", s_out, "Output directory");
  synth->add_option("--length", sc.length, "Frame count");
  synth->add_option("--width", sc.frame_w, "Frame width");
  synth->add_option("--height", sc.frame_h, "Frame height");
  synth->add_option("--target-size", sc.target_size, "Initial target side (px)");
  synth->add_option("--dx", sc.dx, "Translation px/frame");
  synth->add_option("--dy", sc.dy, "Translation px/frame");
  synth->add_option("--zoom", sc.zoom, "Scale factor per frame");
  synth->add_option("--occlude-start", sc.occlude_start, "First occluded frame");
  synth->add_option("--occlude-len", sc.occlude_len, "Occlusion length");
  synth->add_option("--seed", sc.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the message
    return 2;
  }

  try {
    if (*track) return cmd_track(t_seqs, t_config, t_out, t_jobs, t_dump);
    if (*train) return cmd_train(tr_data, tr_config, tr_out, tr_resume);
    if (*eval) return cmd_eval(e_dataset, e_results, e_out, e_jobs);
    if (*gc) return cmd_gradcheck(g_size, g_channels, g_seed, g_perturb, g_out);
    if (*synth) return cmd_synth(s_kind, s_out, sc);
  } catch (const TrainingError& e) {
    std::cerr << "rar: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "rar: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "rar: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
