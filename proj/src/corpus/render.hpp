#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/image.hpp"
#include "corpus/alphabet.hpp"

namespace ctig::corpus {

// A simulated writer: a font variant plus appearance factors. The same
// (writer, jitter_seed, text, seed) renders bit-identically.
struct WriterStyle {
  int writer_id = 0;
  int font_id = 0;
  double slant = 0.0;         // radians, positive leans right
  double stroke_scale = 1.0;  // multiplier on nominal stroke thickness
  double ink_level = 0.85;    // in [0,1], higher is darker ink
  uint64_t jitter_seed = 0;

  nlohmann::ordered_json to_json() const;
  static WriterStyle from_json(const nlohmann::ordered_json& j);
};

std::vector<WriterStyle> make_writers(int n, uint64_t seed);

inline constexpr int kImageHeight = 64;
inline constexpr int kImageWidth = 256;
inline constexpr int kMaxTextLen = 24;

// Deterministic word renderer: fixed 64x256 canvas, aspect-preserving glyph
// scale, right-padded with paper background. Throws InvalidArg on empty
// text, characters outside `alphabet`, or text that cannot fit at the
// minimum scale.
Image render_word(const std::string& text, const WriterStyle& style, uint64_t seed,
                  const Alphabet& alphabet);

}  // namespace ctig::corpus
