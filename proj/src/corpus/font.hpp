#pragma once

#include <array>
#include <map>
#include <vector>

#include "common/real.hpp"

namespace ctig::corpus {

using Point = std::array<double, 2>;
using Stroke = std::vector<Point>;

// Skeleton glyph: polyline strokes in a unit frame. Baseline at y=0,
// x-height at y=1, ascenders up to ~1.55, descenders down to ~-0.55.
struct Glyph {
  double advance = 0.7;
  std::vector<Stroke> strokes;
};

// Parametric variant of the built-in skeleton font; distinct font_ids give
// visually distinct letterforms before any per-writer jitter.
struct StrokeFont {
  int font_id = 0;
  double round = 1.0;    // horizontal radius multiplier for bowls
  double width = 1.0;    // overall horizontal scale
  double spacing = 0.16;  // inter-character gap in glyph units

  const Glyph& glyph(char c) const;
  bool has_glyph(char c) const;

  std::map<char, Glyph> glyphs;
};

StrokeFont make_font(int font_id);
int num_builtin_fonts();

}  // namespace ctig::corpus
