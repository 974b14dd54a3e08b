#include "corpus/render.hpp"

#include <algorithm>
#include <cmath>

#include "common/error.hpp"
#include "common/hash.hpp"
#include "common/rng.hpp"
#include "corpus/font.hpp"

namespace ctig::corpus {

nlohmann::ordered_json WriterStyle::to_json() const {
  nlohmann::ordered_json j;
  j["writer_id"] = writer_id;
  j["font_id"] = font_id;
  j["slant"] = slant;
  j["stroke_scale"] = stroke_scale;
  j["ink_level"] = ink_level;
  j["jitter_seed"] = jitter_seed;
  return j;
}

WriterStyle WriterStyle::from_json(const nlohmann::ordered_json& j) {
  WriterStyle w;
  w.writer_id = j.at("writer_id").get<int>();
  w.font_id = j.at("font_id").get<int>();
  w.slant = j.at("slant").get<double>();
  w.stroke_scale = j.at("stroke_scale").get<double>();
  w.ink_level = j.at("ink_level").get<double>();
  w.jitter_seed = j.at("jitter_seed").get<uint64_t>();
  return w;
}

std::vector<WriterStyle> make_writers(int n, uint64_t seed) {
  if (n < 1) throw InvalidArg("make_writers: n must be >= 1");
  Rng rng(hash_combine(seed, 0x57524954u));  // style stream
  std::vector<WriterStyle> ws;
  ws.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    WriterStyle w;
    w.writer_id = i;
    w.font_id = i % num_builtin_fonts();
    w.slant = rng.uniform(-0.14, 0.24);
    w.stroke_scale = rng.uniform(0.75, 1.55);
    w.ink_level = rng.uniform(0.62, 0.97);
    w.jitter_seed = rng.next_u64();
    ws.push_back(w);
  }
  return ws;
}

namespace {

constexpr double kUnit = 24.0;       // pixels per glyph unit at scale 1
constexpr double kBaselineY = 44.0;  // canvas row of the glyph baseline
constexpr double kMarginX = 5.0;
constexpr double kMinScale = 0.60;

struct Seg {
  double x0, y0, x1, y1;
};

double dist_to_seg(double px, double py, const Seg& s) {
  double dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 1e-12) t = std::clamp(((px - s.x0) * dx + (py - s.y0) * dy) / len2, 0.0, 1.0);
  double qx = s.x0 + t * dx - px, qy = s.y0 + t * dy - py;
  return std::sqrt(qx * qx + qy * qy);
}

void stamp_segment(std::vector<double>& cov, int H, int W, const Seg& s, double thick) {
  double r = thick * 0.5 + 1.0;
  int x0 = std::max(0, static_cast<int>(std::floor(std::min(s.x0, s.x1) - r)));
  int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max(s.x0, s.x1) + r)));
  int y0 = std::max(0, static_cast<int>(std::floor(std::min(s.y0, s.y1) - r)));
  int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max(s.y0, s.y1) + r)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double d = dist_to_seg(x + 0.5, y + 0.5, s);
      double c = std::clamp(thick * 0.5 + 0.5 - d, 0.0, 1.0);
      if (c > 0) {
        double& cell = cov[static_cast<size_t>(y) * W + x];
        cell = std::max(cell, c);
      }
    }
  }
}

}  // namespace

Image render_word(const std::string& text, const WriterStyle& style, uint64_t seed,
                  const Alphabet& alphabet) {
  if (text.empty()) throw InvalidArg("render_word: empty text");
  if (text.size() > kMaxTextLen)
    throw InvalidArg("render_word: text longer than " + std::to_string(kMaxTextLen));
  StrokeFont font = make_font(style.font_id);
  for (char c : text) {
    alphabet.index_of(c);  // rejection names the character
    if (!font.has_glyph(c))
      throw InvalidArg(std::string("render_word: no glyph for '") + c + "'");
  }

  const int H = kImageHeight, W = kImageWidth;

  // Natural width in pixels at scale 1, aspect-preserving shrink if needed.
  double adv_units = 0.0;
  for (char c : text) adv_units += font.glyph(c).advance + font.spacing;
  double natural_w = adv_units * kUnit;
  double usable_w = W - 2.0 * kMarginX;
  double scale = std::min(1.0, usable_w / natural_w);
  if (scale < kMinScale)
    throw InvalidArg("render_word: text too long to fit " + std::to_string(W) +
                     " px at minimum scale: \"" + text + "\"");

  Rng rng(hash_combine(hash_combine(seed, style.jitter_seed), fnv1a(text)));

  // Baseline wobble: two seeded low-frequency waves.
  double amp1 = rng.uniform(0.5, 1.8), lam1 = rng.uniform(60, 140), ph1 = rng.uniform(0, 6.2832);
  double amp2 = rng.uniform(0.2, 0.8), lam2 = rng.uniform(18, 40), ph2 = rng.uniform(0, 6.2832);
  auto wobble = [&](double x) {
    return amp1 * std::sin(6.2832 * x / lam1 + ph1) + amp2 * std::sin(6.2832 * x / lam2 + ph2);
  };

  std::vector<double> cov(static_cast<size_t>(H) * W, 0.0);
  std::vector<double> char_ink(text.size());
  double shear = std::tan(style.slant);
  double thick = std::max(1.1, 2.2 * style.stroke_scale * scale);

  double pen = kMarginX;
  for (size_t ci = 0; ci < text.size(); ++ci) {
    const Glyph& g = font.glyph(text[ci]);
    double jdx = rng.normal(0, 0.6), jdy = rng.normal(0, 0.8);
    double jrot = rng.normal(0, 0.025);
    double jscale = std::clamp(1.0 + rng.normal(0, 0.035), 0.85, 1.15);
    char_ink[ci] = rng.normal(0, 0.05);
    double cosr = std::cos(jrot), sinr = std::sin(jrot);
    double cx = g.advance * 0.5, cy = 0.5;  // rotation pivot in glyph units

    for (const auto& stroke : g.strokes) {
      double prevx = 0, prevy = 0;
      bool first = true;
      for (const auto& p : stroke) {
        // char-local jitter: rotate and scale about the glyph center
        double gx = cx + ((p[0] - cx) * cosr - (p[1] - cy) * sinr) * jscale;
        double gy = cy + ((p[0] - cx) * sinr + (p[1] - cy) * cosr) * jscale;
        double px = pen + (gx * kUnit + jdx) * scale;
        double py = kBaselineY - (gy * kUnit + jdy) * scale;
        px += shear * (kBaselineY - py);
        py += wobble(px);
        if (!first) stamp_segment(cov, H, W, {prevx, prevy, px, py}, thick);
        prevx = px;
        prevy = py;
        first = false;
      }
    }
    pen += (g.advance + font.spacing) * kUnit * scale;
  }

  // Paper with a faint seeded tint plus pixel noise, ink laid on top.
  double tint_amp = rng.uniform(0.0, 0.02);
  double tint_lam = rng.uniform(90, 220), tint_ph = rng.uniform(0, 6.2832);
  Image img(H, W);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double paper = 0.93 + tint_amp * std::sin(6.2832 * (x + 0.37 * y) / tint_lam + tint_ph) +
                     rng.normal(0, 0.012);
      int ci_near = 0;
      // nearest character column, for per-char ink variation
      double rel = (x - kMarginX) / std::max(1e-9, pen - kMarginX);
      ci_near = std::clamp(static_cast<int>(rel * static_cast<double>(text.size())), 0,
                           static_cast<int>(text.size()) - 1);
      double ink = std::clamp(1.0 - style.ink_level * 0.88 + char_ink[static_cast<size_t>(ci_near)],
                              0.02, 0.75);
      double c = cov[static_cast<size_t>(y) * W + x];
      double lum = paper - c * (paper - ink);
      img.at(y, x) = static_cast<real>(std::clamp(2.0 * lum - 1.0, -1.0, 1.0));
    }
  }
  img.quantize();
  return img;
}

}  // namespace ctig::corpus
