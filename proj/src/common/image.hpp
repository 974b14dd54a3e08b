#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "common/tensor.hpp"

namespace ctig {

// Grayscale image, values in [-1, 1]. Canonical samples are quantized to
// 8 bits so PGM round-trips are bit-exact.
struct Image {
  int h = 0;
  int w = 0;
  std::vector<real> px;

  Image() = default;
  Image(int h_, int w_) : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, real(0)) {}

  real& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
  real at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
  int64_t numel() const { return static_cast<int64_t>(px.size()); }

  Tensor to_tensor() const {  // (1, 1, h, w)
    Tensor t({1, 1, h, w});
    t.v.assign(px.begin(), px.end());
    return t;
  }

  static Image from_tensor_plane(const Tensor& t, int64_t plane, int h, int w);

  // Quantize in place to the 8-bit grid used by storage.
  void quantize();
};

uint8_t pixel_to_u8(real x);
real u8_to_pixel(uint8_t b);

void write_pgm(const std::string& path, const Image& img);
Image read_pgm(const std::string& path);

// Horizontal contact sheet of equally sized tiles, for eyeballing batches.
Image contact_sheet(const std::vector<Image>& tiles, int cols);

}  // namespace ctig
