#include "proca/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "proca/png_io.hpp"

namespace proca {

namespace {

// 5x7 bitmap glyphs, one byte per row (low 5 bits). Digits, minus, dot and
// the letters needed for axis/titles.
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
    {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
};

const Glyph* find_glyph(char ch) {
  if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
  for (const auto& g : kFont)
    if (g.ch == ch) return &g;
  return nullptr;
}

struct Canvas {
  ImageU8 img;

  Canvas(int w, int h) {
    img.h = h;
    img.w = w;
    img.channels = 3;
    img.pixels.assign(static_cast<std::size_t>(w) * h * 3, 255);
  }

  void set(int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || x >= img.w || y < 0 || y >= img.h) return;
    for (int k = 0; k < 3; ++k) img.at(y, x, k) = c[k];
  }

  void hline(int x0, int x1, int y, std::array<std::uint8_t, 3> c) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, c);
  }
  void vline(int x, int y0, int y1, std::array<std::uint8_t, 3> c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) set(x, y, c);
  }

  void line(double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
    const double dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(2, static_cast<int>(std::ceil(std::max(std::abs(dx), std::abs(dy)))));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      set(static_cast<int>(std::lround(x0 + t * dx)), static_cast<int>(std::lround(y0 + t * dy)), c);
    }
  }

  void fill_rect(int x0, int y0, int x1, int y1, std::array<std::uint8_t, 3> c) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) hline(x0, x1, y, c);
  }

  void text(int x, int y, const std::string& s, std::array<std::uint8_t, 3> c) {
    int cx = x;
    for (char ch : s) {
      if (const Glyph* g = find_glyph(ch)) {
        for (int row = 0; row < 7; ++row)
          for (int col = 0; col < 5; ++col)
            if (g->rows[row] & (1 << (4 - col))) set(cx + col, y + row, c);
      }
      cx += 6;
    }
  }
};

constexpr std::array<std::uint8_t, 3> kBlack{20, 20, 20};
constexpr std::array<std::uint8_t, 3> kGrid{225, 225, 225};

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

struct Frame {
  int left, right, top, bottom;
  double xmin, xmax, ymin, ymax;

  double px(double x) const {
    return left + (x - xmin) / (xmax - xmin + 1e-300) * (right - left);
  }
  double py(double y) const {
    return bottom - (y - ymin) / (ymax - ymin + 1e-300) * (bottom - top);
  }
};

Frame draw_frame(Canvas& canvas, const std::string& title, double xmin, double xmax, double ymin,
                 double ymax) {
  Frame f{60, canvas.img.w - 20, 30, canvas.img.h - 35, xmin, xmax, ymin, ymax};
  if (f.xmax <= f.xmin) f.xmax = f.xmin + 1;
  if (f.ymax <= f.ymin) f.ymax = f.ymin + 1;
  canvas.text(f.left, 12, title, kBlack);
  for (int i = 0; i <= 4; ++i) {
    const double ty = f.ymin + (f.ymax - f.ymin) * i / 4.0;
    const int y = static_cast<int>(std::lround(f.py(ty)));
    canvas.hline(f.left, f.right, y, kGrid);
    canvas.text(4, y - 3, tick_label(ty), kBlack);
    const double tx = f.xmin + (f.xmax - f.xmin) * i / 4.0;
    const int x = static_cast<int>(std::lround(f.px(tx)));
    canvas.text(x - 8, canvas.img.h - 22, tick_label(tx), kBlack);
  }
  canvas.hline(f.left, f.right, f.bottom, kBlack);
  canvas.vline(f.left, f.top, f.bottom, kBlack);
  return f;
}

}  // namespace

void plot_lines(const std::string& path, const std::string& title,
                const std::vector<PlotSeries>& series, int width, int height) {
  Canvas canvas(width, height);
  double xmin = std::numeric_limits<double>::max(), xmax = std::numeric_limits<double>::lowest();
  double ymin = xmin, ymax = xmax;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) continue;
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  const Frame f = draw_frame(canvas, title, xmin, xmax, ymin, ymax);

  int legend_y = f.top + 4;
  for (const auto& s : series) {
    bool has_prev = false;
    double px0 = 0, py0 = 0;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (std::isnan(s.y[i])) {
        has_prev = false;
        continue;
      }
      const double px1 = f.px(s.x[i]), py1 = f.py(s.y[i]);
      if (has_prev) canvas.line(px0, py0, px1, py1, s.color);
      px0 = px1;
      py0 = py1;
      has_prev = true;
    }
    canvas.fill_rect(f.left + 6, legend_y, f.left + 18, legend_y + 2, s.color);
    canvas.text(f.left + 24, legend_y - 2, s.label, kBlack);
    legend_y += 12;
  }
  write_png(path, canvas.img);
}

void plot_bars(const std::string& path, const std::string& title,
               const std::vector<double>& values, int width, int height) {
  Canvas canvas(width, height);
  double ymax = 0;
  for (double v : values) ymax = std::max(ymax, v);
  if (ymax <= 0) ymax = 1;
  const Frame f = draw_frame(canvas, title, 0, static_cast<double>(values.size()), 0, ymax);
  const double bar_w = (f.right - f.left) / std::max<std::size_t>(1, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const int x0 = static_cast<int>(std::lround(f.left + bar_w * i + bar_w * 0.15));
    const int x1 = static_cast<int>(std::lround(f.left + bar_w * (i + 1) - bar_w * 0.15));
    const int y0 = static_cast<int>(std::lround(f.py(values[i])));
    canvas.fill_rect(x0, y0, x1, f.bottom - 1, {90, 140, 220});
    canvas.text((x0 + x1) / 2 - 2, f.bottom + 4, std::to_string(i + 1), kBlack);
  }
  write_png(path, canvas.img);
}

}  // namespace proca
