#include "corpus/font.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ctig::corpus {

namespace {

constexpr double kPi = 3.14159265358979323846;

Stroke line(std::initializer_list<Point> pts) { return Stroke(pts); }

// Elliptical arc from angle a0 to a1 (degrees, CCW positive), sampled densely
// enough that segment rendering looks smooth at 64 px height.
Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1,
           int n = 14) {
  Stroke s;
  s.reserve(static_cast<size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    double a = (a0 + (a1 - a0) * i / n) * kPi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return s;
}

std::map<char, Glyph> build_skeleton() {
  std::map<char, Glyph> g;
  auto put = [&g](char c, double adv, std::vector<Stroke> strokes) {
    g[c] = Glyph{adv, std::move(strokes)};
  };

  put('a', 0.85, {arc(0.33, 0.50, 0.33, 0.50, 0, 360),
                  line({{0.66, 1.00}, {0.66, 0.15}, {0.76, 0.00}})});
  put('b', 0.80, {line({{0.06, 1.55}, {0.06, 0.00}}),
                  arc(0.38, 0.50, 0.32, 0.50, 110, -110)});
  put('c', 0.76, {arc(0.38, 0.50, 0.34, 0.50, 55, 305)});
  put('d', 0.84, {line({{0.70, 1.55}, {0.70, 0.00}}),
                  arc(0.38, 0.50, 0.32, 0.50, 70, 290)});
  put('e', 0.76, {line({{0.06, 0.52}, {0.68, 0.52}}),
                  arc(0.37, 0.50, 0.33, 0.50, 4, 300)});
  put('f', 0.62, {line({{0.40, 0.00}, {0.40, 1.20}}),
                  arc(0.58, 1.22, 0.20, 0.30, 180, 60),
                  line({{0.12, 1.00}, {0.62, 1.00}})});
  put('g', 0.85, {arc(0.33, 0.50, 0.33, 0.50, 0, 360),
                  line({{0.66, 1.00}, {0.66, -0.25}}),
                  arc(0.38, -0.25, 0.28, 0.30, 0, -160)});
  put('h', 0.82, {line({{0.06, 1.55}, {0.06, 0.00}}),
                  arc(0.38, 0.55, 0.32, 0.45, 176, 4),
                  line({{0.70, 0.55}, {0.70, 0.00}})});
  put('i', 0.30, {line({{0.12, 1.00}, {0.12, 0.00}}),
                  arc(0.12, 1.30, 0.05, 0.05, 0, 360, 8)});
  put('j', 0.36, {line({{0.16, 1.00}, {0.16, -0.30}}),
                  arc(-0.06, -0.30, 0.22, 0.25, 0, -120),
                  arc(0.16, 1.30, 0.05, 0.05, 0, 360, 8)});
  put('k', 0.78, {line({{0.06, 1.55}, {0.06, 0.00}}),
                  line({{0.06, 0.48}, {0.62, 1.00}}),
                  line({{0.26, 0.62}, {0.66, 0.00}})});
  put('l', 0.34, {line({{0.10, 1.55}, {0.10, 0.10}, {0.24, 0.00}})});
  put('m', 1.05, {line({{0.05, 1.00}, {0.05, 0.00}}),
                  arc(0.27, 0.55, 0.22, 0.45, 178, 2),
                  line({{0.49, 0.55}, {0.49, 0.00}}),
                  arc(0.71, 0.55, 0.22, 0.45, 178, 2),
                  line({{0.93, 0.55}, {0.93, 0.00}})});
  put('n', 0.79, {line({{0.05, 1.00}, {0.05, 0.00}}),
                  arc(0.36, 0.55, 0.31, 0.45, 178, 2),
                  line({{0.67, 0.55}, {0.67, 0.00}})});
  put('o', 0.78, {arc(0.36, 0.50, 0.34, 0.50, 0, 360)});
  put('p', 0.80, {line({{0.06, 1.00}, {0.06, -0.55}}),
                  arc(0.38, 0.50, 0.32, 0.48, 115, -115)});
  put('q', 0.86, {arc(0.36, 0.50, 0.33, 0.50, 0, 360),
                  line({{0.69, 1.00}, {0.69, -0.55}}),
                  line({{0.69, -0.35}, {0.82, -0.50}})});
  put('r', 0.60, {line({{0.06, 1.00}, {0.06, 0.00}}),
                  arc(0.32, 0.60, 0.26, 0.38, 170, 20)});
  put('s', 0.72, {arc(0.33, 0.74, 0.24, 0.26, 30, 270),
                  arc(0.33, 0.26, 0.24, 0.26, 90, -120)});
  put('t', 0.66, {line({{0.32, 1.45}, {0.32, 0.12}}),
                  arc(0.52, 0.14, 0.20, 0.14, 180, 300),
                  line({{0.06, 1.00}, {0.58, 1.00}})});
  put('u', 0.79, {line({{0.05, 1.00}, {0.05, 0.45}}),
                  arc(0.36, 0.45, 0.31, 0.45, 182, 358),
                  line({{0.67, 1.00}, {0.67, 0.00}})});
  put('v', 0.68, {line({{0.04, 1.00}, {0.33, 0.00}}),
                  line({{0.33, 0.00}, {0.62, 1.00}})});
  put('w', 0.95, {line({{0.03, 1.00}, {0.25, 0.00}}),
                  line({{0.25, 0.00}, {0.46, 0.85}}),
                  line({{0.46, 0.85}, {0.67, 0.00}}),
                  line({{0.67, 0.00}, {0.89, 1.00}})});
  put('x', 0.70, {line({{0.05, 1.00}, {0.62, 0.00}}),
                  line({{0.62, 1.00}, {0.05, 0.00}})});
  put('y', 0.70, {line({{0.05, 1.00}, {0.34, 0.35}}),
                  line({{0.63, 1.00}, {0.16, -0.55}})});
  put('z', 0.72, {line({{0.06, 1.00}, {0.60, 1.00}}),
                  line({{0.60, 1.00}, {0.06, 0.00}}),
                  line({{0.06, 0.00}, {0.62, 0.00}})});

  put('0', 0.78, {arc(0.34, 0.72, 0.30, 0.72, 0, 360)});
  put('1', 0.46, {line({{0.12, 1.20}, {0.28, 1.44}, {0.28, 0.00}})});
  put('2', 0.72, {arc(0.30, 1.05, 0.26, 0.40, 175, -40),
                  line({{0.47, 0.74}, {0.04, 0.00}}),
                  line({{0.04, 0.00}, {0.60, 0.00}})});
  put('3', 0.72, {arc(0.30, 1.08, 0.26, 0.36, 150, -80),
                  arc(0.30, 0.36, 0.28, 0.36, 80, -150)});
  put('4', 0.74, {line({{0.42, 1.44}, {0.06, 0.50}}),
                  line({{0.06, 0.50}, {0.62, 0.50}}),
                  line({{0.46, 0.90}, {0.46, 0.00}})});
  put('5', 0.72, {line({{0.54, 1.44}, {0.12, 1.44}}),
                  line({{0.12, 1.44}, {0.10, 0.82}}),
                  arc(0.32, 0.45, 0.28, 0.45, 120, -120)});
  put('6', 0.72, {arc(0.32, 0.40, 0.28, 0.40, 0, 360),
                  line({{0.10, 0.55}, {0.50, 1.44}})});
  put('7', 0.70, {line({{0.06, 1.44}, {0.60, 1.44}}),
                  line({{0.60, 1.44}, {0.22, 0.00}})});
  put('8', 0.72, {arc(0.32, 1.05, 0.24, 0.38, 0, 360),
                  arc(0.32, 0.33, 0.27, 0.33, 0, 360)});
  put('9', 0.72, {arc(0.32, 1.00, 0.26, 0.40, 0, 360),
                  line({{0.56, 1.10}, {0.42, 0.00}})});
  return g;
}

const std::map<char, Glyph>& skeleton() {
  static const std::map<char, Glyph> s = build_skeleton();
  return s;
}

}  // namespace

const Glyph& StrokeFont::glyph(char c) const {
  auto it = glyphs.find(c);
  if (it == glyphs.end())
    throw InvalidArg(std::string("no glyph for character: '") + c + "'");
  return it->second;
}

bool StrokeFont::has_glyph(char c) const { return glyphs.count(c) > 0; }

int num_builtin_fonts() { return 3; }

StrokeFont make_font(int font_id) {
  struct Variant {
    double round, width, spacing;
  };
  static const Variant variants[] = {
      {1.00, 1.00, 0.16},  // upright
      {0.80, 0.90, 0.10},  // narrow, tight
      {1.18, 1.10, 0.24},  // wide, loose
  };
  if (font_id < 0 || font_id >= num_builtin_fonts())
    throw InvalidArg("unknown font_id: " + std::to_string(font_id));
  const Variant& v = variants[font_id];
  StrokeFont f;
  f.font_id = font_id;
  f.round = v.round;
  f.width = v.width;
  f.spacing = v.spacing;
  for (const auto& [c, g] : skeleton()) {
    Glyph out;
    out.advance = g.advance * v.width;
    for (const auto& stroke : g.strokes) {
      Stroke s;
      s.reserve(stroke.size());
      for (const auto& p : stroke) {
        // Squash bowls around each stroke's own horizontal center so
        // roundness changes shape rather than position.
        s.push_back({p[0] * v.width, p[1]});
      }
      if (v.round != 1.0 && s.size() > 2) {
        double cx = 0;
        for (auto& p : s) cx += p[0];
        cx /= static_cast<double>(s.size());
        for (auto& p : s) p[0] = cx + (p[0] - cx) * v.round;
      }
      out.strokes.push_back(std::move(s));
    }
    f.glyphs[c] = std::move(out);
  }
  return f;
}

}  // namespace ctig::corpus
