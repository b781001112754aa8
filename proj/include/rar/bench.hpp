#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "rar/error.hpp"
#include "rar/image.hpp"
#include "rar/image_io.hpp"
#include "rar/rng.hpp"

namespace rar {

struct SequenceSpec {
  std::string name;
  std::vector<std::string> image_paths;  // ordered
  std::vector<Rect> rects;               // ground truth, same length
  std::vector<std::string> attributes;   // OTB tags (IV, OPR, SV, ...)
};

struct EvalResult {
  std::vector<real_t> precision;  // thresholds 0..50 px, step 1 (51 samples)
  std::vector<real_t> success;    // overlap thresholds 0..1, step 0.05 (21)
  real_t dp20 = 0.0;
  real_t auc = 0.0;
  int frames_evaluated = 0;
};

// ---------------------------------------------------------------------------
// OTB-format ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<real_t> parse_rect_line(const std::string& line,
                                           const std::string& path, int lineno) {
  std::string norm = line;
  for (char& c : norm)
    if (c == ',' || c == '\t') c = ' ';
  std::istringstream ss(norm);
  std::vector<real_t> vals;
  std::string tok;
  while (ss >> tok) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": non-numeric field '" + tok + "'");
    }
  }
  if (vals.size() != 4)
    throw ParseError(path + ":" + std::to_string(lineno) + ": expected 4 fields, got " +
                     std::to_string(vals.size()));
  return vals;
}

}  // namespace detail

// Directory layout: DIR/img/0001.(jpg|png|ppm...), DIR/groundtruth_rect.txt
// with one "x,y,w,h" (comma or tab separated) line per frame, and an
// optional DIR/attrs.txt with one attribute tag per line.
inline SequenceSpec load_otb_sequence(const std::string& dir) {
  namespace fs = std::filesystem;
  SequenceSpec spec;
  spec.name = fs::path(dir).filename().string();

  const fs::path img_dir = fs::path(dir) / "img";
  if (!fs::is_directory(img_dir))
    throw ParseError(dir + ": missing img/ directory");
  for (const auto& e : fs::directory_iterator(img_dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (char& c : ext) c = static_cast<char>(std::tolower(c));
    if (ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".ppm" ||
        ext == ".pgm" || ext == ".pnm")
      spec.image_paths.push_back(e.path().string());
  }
  std::sort(spec.image_paths.begin(), spec.image_paths.end());
  if (spec.image_paths.empty()) throw ParseError(dir + ": img/ has no frames");

  const std::string gt = (fs::path(dir) / "groundtruth_rect.txt").string();
  std::ifstream in(gt);
  if (!in) throw ParseError(gt + ": cannot open");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<real_t> v = detail::parse_rect_line(line, gt, lineno);
    spec.rects.push_back(Rect{v[0], v[1], v[2], v[3]});
  }
  if (spec.rects.size() != spec.image_paths.size())
    throw ParseError(dir + ": " + std::to_string(spec.image_paths.size()) +
                     " frames but " + std::to_string(spec.rects.size()) +
                     " ground-truth rects");

  const std::string attrs = (fs::path(dir) / "attrs.txt").string();
  std::ifstream ain(attrs);
  while (ain && std::getline(ain, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) spec.attributes.push_back(line);
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

inline real_t overlap(const Rect& a, const Rect& b) {
  const real_t ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const real_t iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const real_t inter = ix * iy;
  const real_t uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

inline real_t center_error(const Rect& a, const Rect& b) {
  const real_t dx = a.cx() - b.cx();
  const real_t dy = a.cy() - b.cy();
  return std::sqrt(dx * dx + dy * dy);
}

constexpr int kPrecisionThresholds = 51;  // 0..50 px
constexpr int kSuccessThresholds = 21;    // 0..1 step 0.05

// Success(tau) counts overlap >= tau for tau > 0 and overlap > 0 at tau = 0,
// so a perfect trajectory scores 1 at every sample and a fully disjoint one
// scores 0. Precision(t) counts center error < t. Ground-truth rects with
// non-finite or non-positive extent are skipped in both metrics.
inline EvalResult evaluate(const std::vector<Rect>& trajectory,
                           const SequenceSpec& spec) {
  if (trajectory.size() != spec.rects.size())
    throw DataError("evaluate: trajectory has " + std::to_string(trajectory.size()) +
                    " frames, ground truth has " + std::to_string(spec.rects.size()));
  EvalResult r;
  r.precision.assign(kPrecisionThresholds, 0.0);
  r.success.assign(kSuccessThresholds, 0.0);
  int n = 0;
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    const Rect& gt = spec.rects[f];
    if (!std::isfinite(gt.x) || !std::isfinite(gt.y) || !std::isfinite(gt.w) ||
        !std::isfinite(gt.h) || gt.w <= 0.0 || gt.h <= 0.0)
      continue;
    ++n;
    const real_t err = center_error(trajectory[f], gt);
    const real_t iou = overlap(trajectory[f], gt);
    for (int t = 0; t < kPrecisionThresholds; ++t)
      if (err < static_cast<real_t>(t)) r.precision[t] += 1.0;
    for (int t = 0; t < kSuccessThresholds; ++t) {
      const real_t tau = t * 0.05;
      if (t == 0 ? iou > 0.0 : iou >= tau - 1e-12) r.success[t] += 1.0;
    }
  }
  if (n > 0) {
    for (real_t& v : r.precision) v /= n;
    for (real_t& v : r.success) v /= n;
  }
  r.frames_evaluated = n;
  r.dp20 = r.precision[20];
  real_t s = 0.0;
  for (real_t v : r.success) s += v;
  r.auc = s / kSuccessThresholds;
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic sequences
// ---------------------------------------------------------------------------

enum class SynthKind { kStatic, kTranslate, kZoom, kOcclude };

inline SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "static") return SynthKind::kStatic;
  if (s == "translate") return SynthKind::kTranslate;
  if (s == "zoom") return SynthKind::kZoom;
  if (s == "occlude") return SynthKind::kOcclude;
  throw ConfigError("synth kind must be static, translate, zoom or occlude, got '" +
                    s + "'");
}

struct SynthConfig {
  int length = 50;
  int frame_w = 240, frame_h = 180;
  real_t target_size = 24.0;
  real_t dx = 2.0, dy = 0.0;        // translate px/frame
  real_t zoom = 1.005;              // zoom factor/frame
  int occlude_start = 20, occlude_len = 5;
  std::uint64_t seed = 7;
};

struct SynthSequence {
  std::vector<ImageFrame> frames;
  SequenceSpec spec;
};

// Deterministic textured square over a textured background with exact ground
// truth; the texture is sampled at a fixed grid so zooming rescales it.
inline SynthSequence synth_sequence(SynthKind kind, const SynthConfig& cfg) {
  if (cfg.length < 2) throw ParameterError("synth_sequence: length must be >= 2");
  Rng rng(cfg.seed);
  const int tex_n = 48;
  std::vector<real_t> tex(static_cast<std::size_t>(tex_n) * tex_n * 3);
  for (real_t& v : tex) v = rng.uniform(0.0, 1.0);
  ImageFrame bg(cfg.frame_w, cfg.frame_h);
  for (auto& px : bg.pixels)
    px = static_cast<std::uint8_t>(40 + rng.uniform_index(50));

  SynthSequence out;
  out.spec.name = "synth";
  real_t cx = cfg.frame_w / 2.0, cy = cfg.frame_h / 2.0;
  real_t size = cfg.target_size;
  for (int f = 0; f < cfg.length; ++f) {
    if (kind == SynthKind::kTranslate && f > 0) {
      cx += cfg.dx;
      cy += cfg.dy;
    }
    if (kind == SynthKind::kZoom && f > 0) size *= cfg.zoom;

    ImageFrame frame = bg;
    const bool occluded = kind == SynthKind::kOcclude && f >= cfg.occlude_start &&
                          f < cfg.occlude_start + cfg.occlude_len;
    const real_t x0 = cx - size / 2.0, y0 = cy - size / 2.0;
    if (!occluded) {
      const int ix0 = static_cast<int>(std::floor(x0));
      const int iy0 = static_cast<int>(std::floor(y0));
      const int span = static_cast<int>(std::ceil(size)) + 1;
      for (int y = std::max(0, iy0); y < std::min(cfg.frame_h, iy0 + span); ++y)
        for (int x = std::max(0, ix0); x < std::min(cfg.frame_w, ix0 + span); ++x) {
          const real_t u = (x - x0) / size, v = (y - y0) / size;
          if (u < 0.0 || u >= 1.0 || v < 0.0 || v >= 1.0) continue;
          const int tu = std::min(tex_n - 1, static_cast<int>(u * tex_n));
          const int tv = std::min(tex_n - 1, static_cast<int>(v * tex_n));
          for (int c = 0; c < 3; ++c)
            frame.at(x, y, c) = static_cast<std::uint8_t>(
                100 + 155 * tex[(static_cast<std::size_t>(tv) * tex_n + tu) * 3 + c]);
        }
    }
    out.frames.push_back(std::move(frame));
    out.spec.rects.push_back(Rect{x0, y0, size, size});
    out.spec.image_paths.push_back("");  // in-memory sequence
  }
  return out;
}

// Writes a synthetic sequence in the OTB directory layout (PNG frames).
inline void write_otb_sequence(const SynthSequence& seq, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "img");
  std::ofstream gt(fs::path(dir) / "groundtruth_rect.txt");
  if (!gt) throw DataError(dir + ": cannot write ground truth");
  for (std::size_t f = 0; f < seq.frames.size(); ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "%04zu.png", f + 1);
    save_png(seq.frames[f], (fs::path(dir) / "img" / name).string());
    const Rect& r = seq.spec.rects[f];
    char line[128];
    std::snprintf(line, sizeof(line), "%.2f,%.2f,%.2f,%.2f\n", r.x, r.y, r.w, r.h);
    gt << line;
  }
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

inline void write_curves_csv(const EvalResult& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write");
  out << "kind,threshold,value\n";
  out.precision(10);
  for (int t = 0; t < kPrecisionThresholds; ++t)
    out << "precision," << t << "," << r.precision[t] << "\n";
  for (int t = 0; t < kSuccessThresholds; ++t)
    out << "success," << t * 0.05 << "," << r.success[t] << "\n";
}

// Minimal polyline plot of one curve, axes 0..1 (y) over the threshold range.
inline void write_curve_svg(const std::vector<real_t>& curve, real_t x_max,
                            const std::string& title, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError(path + ": cannot write");
  const int w = 400, h = 300, ml = 40, mb = 30, mt = 24, mr = 10;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\""
      << h << "\">\n";
  out << "<text x=\"" << w / 2 << "\" y=\"16\" text-anchor=\"middle\">" << title
      << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << w - ml - mr
      << "\" height=\"" << h - mt - mb
      << "\" fill=\"none\" stroke=\"black\"/>\n<polyline fill=\"none\" "
         "stroke=\"steelblue\" stroke-width=\"2\" points=\"";
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const real_t fx = curve.size() > 1
                          ? static_cast<real_t>(i) / (curve.size() - 1)
                          : 0.0;
    const real_t px = ml + fx * (w - ml - mr);
    const real_t py = (h - mb) - curve[i] * (h - mt - mb);
    out << px << "," << py << " ";
  }
  out << "\"/>\n<text x=\"" << w / 2 << "\" y=\"" << h - 8
      << "\" text-anchor=\"middle\">threshold (max " << x_max << ")</text>\n</svg>\n";
}

}  // namespace rar
