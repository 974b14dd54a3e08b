#include "common/image.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctig {

uint8_t pixel_to_u8(real x) {
  double y = (static_cast<double>(x) + 1.0) * 127.5;
  long v = std::lround(y);
  return static_cast<uint8_t>(std::clamp(v, 0l, 255l));
}

real u8_to_pixel(uint8_t b) { return static_cast<real>(b / 127.5 - 1.0); }

void Image::quantize() {
  for (auto& x : px) x = u8_to_pixel(pixel_to_u8(x));
}

Image Image::from_tensor_plane(const Tensor& t, int64_t plane, int h, int w) {
  Image img(h, w);
  const real* src = t.data() + plane * h * w;
  std::copy(src, src + static_cast<size_t>(h) * w, img.px.begin());
  return img;
}

void write_pgm(const std::string& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "P5\n" << img.w << " " << img.h << "\n255\n";
  std::vector<uint8_t> row(static_cast<size_t>(img.w));
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) row[static_cast<size_t>(x)] = pixel_to_u8(img.at(y, x));
    f.write(reinterpret_cast<const char*>(row.data()), img.w);
  }
  if (!f) throw std::runtime_error("short write: " + path);
}

Image read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::string magic;
  f >> magic;
  if (magic != "P5") throw std::runtime_error(path + ": not a binary PGM");
  auto next_int = [&f, &path]() {
    // Skip whitespace and '#' comments.
    int c;
    while ((c = f.peek()) != EOF) {
      if (c == '#') {
        std::string line;
        std::getline(f, line);
      } else if (std::isspace(c)) {
        f.get();
      } else {
        break;
      }
    }
    int value = -1;
    f >> value;
    if (!f) throw std::runtime_error(path + ": bad PGM header");
    return value;
  };
  int w = next_int();
  int h = next_int();
  int maxval = next_int();
  if (w <= 0 || h <= 0 || maxval != 255)
    throw std::runtime_error(path + ": unsupported PGM header");
  f.get();  // single whitespace after maxval
  Image img(h, w);
  std::vector<uint8_t> buf(static_cast<size_t>(w) * h);
  f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (f.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error(path + ": truncated PGM");
  for (size_t i = 0; i < buf.size(); ++i) img.px[i] = u8_to_pixel(buf[i]);
  return img;
}

Image contact_sheet(const std::vector<Image>& tiles, int cols) {
  if (tiles.empty()) return Image(1, 1);
  int th = tiles[0].h, tw = tiles[0].w;
  int rows = (static_cast<int>(tiles.size()) + cols - 1) / cols;
  const int pad = 2;
  Image sheet(rows * (th + pad) + pad, cols * (tw + pad) + pad);
  std::fill(sheet.px.begin(), sheet.px.end(), real(-1));
  for (size_t i = 0; i < tiles.size(); ++i) {
    int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
    int oy = pad + r * (th + pad), ox = pad + c * (tw + pad);
    for (int y = 0; y < th; ++y)
      for (int x = 0; x < tw; ++x) sheet.at(oy + y, ox + x) = tiles[i].at(y, x);
  }
  return sheet;
}

}  // namespace ctig
