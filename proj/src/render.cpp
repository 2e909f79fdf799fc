#include "mmfuse/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace {

using Color = std::array<std::uint8_t, 3>;

constexpr std::array<Color, 6> kPalette{{
    {31, 119, 180}, {214, 39, 40}, {44, 160, 44}, {255, 127, 14}, {148, 103, 189}, {140, 86, 75}}};

struct Glyph {
  char ch;
  std::array<std::uint8_t, 7> rows;
};

// 5x7 bitmap font, one row per byte, most significant of the low 5 bits leftmost.
constexpr Glyph kFont[] = {
    {'A', {0b01110, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'B', {0b11110, 0b10001, 0b10001, 0b11110, 0b10001, 0b10001, 0b11110}},
    {'C', {0b01110, 0b10001, 0b10000, 0b10000, 0b10000, 0b10001, 0b01110}},
    {'D', {0b11110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b11110}},
    {'E', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b11111}},
    {'F', {0b11111, 0b10000, 0b10000, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'G', {0b01110, 0b10001, 0b10000, 0b10111, 0b10001, 0b10001, 0b01111}},
    {'H', {0b10001, 0b10001, 0b10001, 0b11111, 0b10001, 0b10001, 0b10001}},
    {'I', {0b01110, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'J', {0b00111, 0b00010, 0b00010, 0b00010, 0b00010, 0b10010, 0b01100}},
    {'K', {0b10001, 0b10010, 0b10100, 0b11000, 0b10100, 0b10010, 0b10001}},
    {'L', {0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b10000, 0b11111}},
    {'M', {0b10001, 0b11011, 0b10101, 0b10101, 0b10001, 0b10001, 0b10001}},
    {'N', {0b10001, 0b10001, 0b11001, 0b10101, 0b10011, 0b10001, 0b10001}},
    {'O', {0b01110, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'P', {0b11110, 0b10001, 0b10001, 0b11110, 0b10000, 0b10000, 0b10000}},
    {'Q', {0b01110, 0b10001, 0b10001, 0b10001, 0b10101, 0b10010, 0b01101}},
    {'R', {0b11110, 0b10001, 0b10001, 0b11110, 0b10100, 0b10010, 0b10001}},
    {'S', {0b01111, 0b10000, 0b10000, 0b01110, 0b00001, 0b00001, 0b11110}},
    {'T', {0b11111, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'U', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01110}},
    {'V', {0b10001, 0b10001, 0b10001, 0b10001, 0b10001, 0b01010, 0b00100}},
    {'W', {0b10001, 0b10001, 0b10001, 0b10101, 0b10101, 0b10101, 0b01010}},
    {'X', {0b10001, 0b10001, 0b01010, 0b00100, 0b01010, 0b10001, 0b10001}},
    {'Y', {0b10001, 0b10001, 0b01010, 0b00100, 0b00100, 0b00100, 0b00100}},
    {'Z', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b10000, 0b11111}},
    {'0', {0b01110, 0b10001, 0b10011, 0b10101, 0b11001, 0b10001, 0b01110}},
    {'1', {0b00100, 0b01100, 0b00100, 0b00100, 0b00100, 0b00100, 0b01110}},
    {'2', {0b01110, 0b10001, 0b00001, 0b00010, 0b00100, 0b01000, 0b11111}},
    {'3', {0b11111, 0b00010, 0b00100, 0b00010, 0b00001, 0b10001, 0b01110}},
    {'4', {0b00010, 0b00110, 0b01010, 0b10010, 0b11111, 0b00010, 0b00010}},
    {'5', {0b11111, 0b10000, 0b11110, 0b00001, 0b00001, 0b10001, 0b01110}},
    {'6', {0b00110, 0b01000, 0b10000, 0b11110, 0b10001, 0b10001, 0b01110}},
    {'7', {0b11111, 0b00001, 0b00010, 0b00100, 0b01000, 0b01000, 0b01000}},
    {'8', {0b01110, 0b10001, 0b10001, 0b01110, 0b10001, 0b10001, 0b01110}},
    {'9', {0b01110, 0b10001, 0b10001, 0b01111, 0b00001, 0b00010, 0b01100}},
    {'.', {0, 0, 0, 0, 0, 0b01100, 0b01100}},
    {'_', {0, 0, 0, 0, 0, 0, 0b11111}},
    {'=', {0, 0, 0b11111, 0, 0b11111, 0, 0}},
    {'-', {0, 0, 0, 0b11111, 0, 0, 0}},
    {'(', {0b00010, 0b00100, 0b01000, 0b01000, 0b01000, 0b00100, 0b00010}},
    {')', {0b01000, 0b00100, 0b00010, 0b00010, 0b00010, 0b00100, 0b01000}},
};

class Canvas {
 public:
  Canvas(int w, int h) : img_{h, w, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3, 255)} {}

  void set(int x, int y, Color c) {
    if (x < 0 || y < 0 || x >= img_.width || y >= img_.height) return;
    auto* p = &img_.data[(static_cast<std::size_t>(y) * img_.width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }

  void dot(int x, int y, Color c, int thickness) {
    const int r0 = -(thickness - 1) / 2;
    for (int dy = r0; dy < r0 + thickness; ++dy)
      for (int dx = r0; dx < r0 + thickness; ++dx) set(x + dx, y + dy, c);
  }

  void line(int x0, int y0, int x1, int y1, Color c, int thickness = 1, int dash = 0) {
    const int dx = std::abs(x1 - x0);
    const int dy = -std::abs(y1 - y0);
    const int sx = x0 < x1 ? 1 : -1;
    const int sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (int step = 0;; ++step) {
      if (dash == 0 || (step / dash) % 2 == 0) dot(x0, y0, c, thickness);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  void text(int x, int y, const std::string& s, Color c, int scale = 1) {
    for (char raw : s) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
      for (const auto& g : kFont) {
        if (g.ch != ch) continue;
        for (int r = 0; r < 7; ++r)
          for (int col = 0; col < 5; ++col)
            if (g.rows[r] & (1 << (4 - col)))
              for (int sy = 0; sy < scale; ++sy)
                for (int sx = 0; sx < scale; ++sx) set(x + col * scale + sx, y + r * scale + sy, c);
      }
      x += 6 * scale;
    }
  }

  RgbImage take() { return std::move(img_); }

 private:
  RgbImage img_;
};

}  // namespace

RgbImage render_roc_plot(const std::vector<RocSeries>& series, int size) {
  Canvas cv(size, size);
  const int margin = size / 10;
  const int left = margin;
  const int right = size - margin / 2;
  const int top = margin / 2;
  const int bottom = size - margin;
  const auto px = [&](double fpr) { return left + static_cast<int>(std::lround(fpr * (right - left))); };
  const auto py = [&](double tpr) { return bottom - static_cast<int>(std::lround(tpr * (bottom - top))); };

  constexpr Color black{0, 0, 0};
  constexpr Color grid{225, 225, 225};
  for (int i = 1; i < 5; ++i) {
    cv.line(px(i / 5.0), top, px(i / 5.0), bottom, grid);
    cv.line(left, py(i / 5.0), right, py(i / 5.0), grid);
  }
  cv.line(px(0), py(0), px(1), py(1), {150, 150, 150}, 1, 4);
  cv.line(left, bottom, right, bottom, black);
  cv.line(left, top, left, bottom, black);
  cv.line(right, top, right, bottom, black);
  cv.line(left, top, right, top, black);
  for (int i = 0; i <= 5; ++i) {
    const std::string tick = i == 5 ? "1.0" : "0." + std::to_string(2 * i);
    cv.line(px(i / 5.0), bottom, px(i / 5.0), bottom + 4, black);
    cv.text(px(i / 5.0) - 8, bottom + 8, tick, black);
    cv.line(left - 4, py(i / 5.0), left, py(i / 5.0), black);
    cv.text(left - 24, py(i / 5.0) - 3, tick, black);
  }
  cv.text((left + right) / 2 - 40, bottom + 24, "FALSE POSITIVE RATE", black);
  cv.text(4, top - 12 > 0 ? top - 12 : 2, "TPR", black);

  for (std::size_t s = 0; s < series.size(); ++s) {
    const Color c = kPalette[s % kPalette.size()];
    const auto& pts = series[s].points;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      cv.line(px(pts[i - 1].fpr), py(pts[i - 1].tpr), px(pts[i].fpr), py(pts[i].tpr), c, 2);
    }
    const int ly = bottom - 14 * static_cast<int>(series.size() - s) - 6;
    const int lx = px(0.42);
    cv.line(lx, ly + 3, lx + 16, ly + 3, c, 3);
    cv.text(lx + 22, ly, series[s].label, black);
  }
  return cv.take();
}

std::array<std::uint8_t, 3> jet_color(double v) {
  v = std::clamp(v, 0.0, 1.0);
  const auto channel = [&](double center) {
    const double x = std::clamp(1.5 - std::abs(4.0 * v - center), 0.0, 1.0);
    return static_cast<std::uint8_t>(std::lround(255.0 * x));
  };
  return {channel(3.0), channel(2.0), channel(1.0)};
}

RgbImage render_cam_overlay(const GrayImage& image, const GrayImage& map, double alpha) {
  if (image.height != map.height || image.width != map.width) {
    throw Error(ErrorKind::kShapeError, "overlay: image and attribution sizes differ");
  }
  RgbImage out{image.height, image.width, 3,
               std::vector<std::uint8_t>(image.pixels.size() * 3)};
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double g = 255.0 * std::clamp(image.pixels[i], 0.0, 1.0);
    const auto c = jet_color(map.pixels[i]);
    for (int k = 0; k < 3; ++k) {
      out.data[i * 3 + k] = static_cast<std::uint8_t>(std::lround((1.0 - alpha) * g + alpha * c[k]));
    }
  }
  return out;
}

}  // namespace mmfuse
