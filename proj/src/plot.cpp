#include "far/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace far {

namespace {

// 5x7 glyphs, column-major bits (LSB = top row). Covers what axis labels and
// legends need: digits, minus, dot, percent, space and uppercase letters.
struct Glyph {
  char ch;
  std::uint8_t col[5];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00}},
    {'-', {0x08, 0x08, 0x08, 0x08, 0x08}},
    {'.', {0x00, 0x60, 0x60, 0x00, 0x00}},
    {'%', {0x62, 0x64, 0x08, 0x13, 0x23}},
    {'/', {0x20, 0x10, 0x08, 0x04, 0x02}},
    {':', {0x00, 0x36, 0x36, 0x00, 0x00}},
    {'0', {0x3E, 0x51, 0x49, 0x45, 0x3E}},
    {'1', {0x00, 0x42, 0x7F, 0x40, 0x00}},
    {'2', {0x42, 0x61, 0x51, 0x49, 0x46}},
    {'3', {0x21, 0x41, 0x45, 0x4B, 0x31}},
    {'4', {0x18, 0x14, 0x12, 0x7F, 0x10}},
    {'5', {0x27, 0x45, 0x45, 0x45, 0x39}},
    {'6', {0x3C, 0x4A, 0x49, 0x49, 0x30}},
    {'7', {0x01, 0x71, 0x09, 0x05, 0x03}},
    {'8', {0x36, 0x49, 0x49, 0x49, 0x36}},
    {'9', {0x06, 0x49, 0x49, 0x29, 0x1E}},
    {'A', {0x7E, 0x11, 0x11, 0x11, 0x7E}},
    {'B', {0x7F, 0x49, 0x49, 0x49, 0x36}},
    {'C', {0x3E, 0x41, 0x41, 0x41, 0x22}},
    {'D', {0x7F, 0x41, 0x41, 0x22, 0x1C}},
    {'E', {0x7F, 0x49, 0x49, 0x49, 0x41}},
    {'F', {0x7F, 0x09, 0x09, 0x09, 0x01}},
    {'G', {0x3E, 0x41, 0x49, 0x49, 0x7A}},
    {'H', {0x7F, 0x08, 0x08, 0x08, 0x7F}},
    {'I', {0x00, 0x41, 0x7F, 0x41, 0x00}},
    {'J', {0x20, 0x40, 0x41, 0x3F, 0x01}},
    {'K', {0x7F, 0x08, 0x14, 0x22, 0x41}},
    {'L', {0x7F, 0x40, 0x40, 0x40, 0x40}},
    {'M', {0x7F, 0x02, 0x0C, 0x02, 0x7F}},
    {'N', {0x7F, 0x04, 0x08, 0x10, 0x7F}},
    {'O', {0x3E, 0x41, 0x41, 0x41, 0x3E}},
    {'P', {0x7F, 0x09, 0x09, 0x09, 0x06}},
    {'Q', {0x3E, 0x41, 0x51, 0x21, 0x5E}},
    {'R', {0x7F, 0x09, 0x19, 0x29, 0x46}},
    {'S', {0x46, 0x49, 0x49, 0x49, 0x31}},
    {'T', {0x01, 0x01, 0x7F, 0x01, 0x01}},
    {'U', {0x3F, 0x40, 0x40, 0x40, 0x3F}},
    {'V', {0x1F, 0x20, 0x40, 0x20, 0x1F}},
    {'W', {0x3F, 0x40, 0x38, 0x40, 0x3F}},
    {'X', {0x63, 0x14, 0x08, 0x14, 0x63}},
    {'Y', {0x07, 0x08, 0x70, 0x08, 0x07}},
    {'Z', {0x61, 0x51, 0x49, 0x45, 0x43}},
};

const Glyph* find_glyph(char c) {
  if (c >= 'a' && c <= 'z') c = char(c - 'a' + 'A');
  for (const Glyph& g : kFont) {
    if (g.ch == c) return &g;
  }
  return nullptr;
}

void put_pixel(ImageU8& img, int x, int y, const std::uint8_t color[3]) {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  img.at(y, x, 0) = color[0];
  img.at(y, x, 1) = color[1];
  img.at(y, x, 2) = color[2];
}

void draw_line(ImageU8& img, int x0, int y0, int x1, int y1,
               const std::uint8_t color[3]) {
  const int dx = std::abs(x1 - x0);
  const int dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1;
  const int sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    put_pixel(img, x0, y0, color);
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

void draw_marker(ImageU8& img, int x, int y, const std::uint8_t color[3]) {
  for (int dy = -2; dy <= 2; ++dy) {
    for (int dx = -2; dx <= 2; ++dx) {
      if (std::abs(dx) + std::abs(dy) <= 2) put_pixel(img, x + dx, y + dy, color);
    }
  }
}

std::string format_tick(double v) {
  char buf[32];
  if (v != 0.0 && (std::fabs(v) >= 1e4 || std::fabs(v) < 1e-2)) {
    std::snprintf(buf, sizeof buf, "%.2g", v);
  } else {
    std::snprintf(buf, sizeof buf, "%.3g", v);
  }
  return buf;
}

}  // namespace

void draw_text(ImageU8& img, int x, int y, const std::string& text,
               const std::uint8_t color[3]) {
  int cx = x;
  for (char c : text) {
    const Glyph* g = find_glyph(c);
    if (g) {
      for (int col = 0; col < 5; ++col) {
        for (int row = 0; row < 7; ++row) {
          if (g->col[col] & (1 << row)) put_pixel(img, cx + col, y + row, color);
        }
      }
    }
    cx += 6;
  }
}

ImageU8 render_plot(const LinePlot& plot) {
  ImageU8 img(plot.width, plot.height);
  std::fill(img.rgb.begin(), img.rgb.end(), std::uint8_t(255));

  const std::uint8_t black[3] = {0, 0, 0};
  const std::uint8_t grey[3] = {200, 200, 200};

  const int ml = 64, mr = 16, mt = 28, mb = 44;
  const int x0 = ml, x1 = plot.width - mr;
  const int y0 = mt, y1 = plot.height - mb;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const PlotSeries& s : plot.series) {
    for (double v : s.x) {
      xmin = std::min(xmin, v);
      xmax = std::max(xmax, v);
    }
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (!(ymax > ymin)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double xpad = 0.04 * (xmax - xmin);
  const double ypad = 0.04 * (ymax - ymin);
  xmin -= xpad;
  xmax += xpad;
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) {
    return x0 + int(std::lround((v - xmin) / (xmax - xmin) * (x1 - x0)));
  };
  auto py = [&](double v) {
    return y1 - int(std::lround((v - ymin) / (ymax - ymin) * (y1 - y0)));
  };

  // Grid and tick labels.
  const int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / ticks;
    const double fy = ymin + (ymax - ymin) * i / ticks;
    draw_line(img, px(fx), y0, px(fx), y1, grey);
    draw_line(img, x0, py(fy), x1, py(fy), grey);
    draw_text(img, px(fx) - 10, y1 + 6, format_tick(fx), black);
    draw_text(img, 6, py(fy) - 3, format_tick(fy), black);
  }
  draw_line(img, x0, y0, x0, y1, black);
  draw_line(img, x0, y1, x1, y1, black);

  draw_text(img, (x0 + x1) / 2 - int(plot.title.size()) * 3, 8, plot.title,
            black);
  draw_text(img, (x0 + x1) / 2 - int(plot.x_label.size()) * 3,
            plot.height - 14, plot.x_label, black);
  draw_text(img, 6, y0 - 14, plot.y_label, black);

  int legend_y = y0 + 6;
  for (const PlotSeries& s : plot.series) {
    for (std::size_t i = 0; i + 1 < s.x.size(); ++i) {
      draw_line(img, px(s.x[i]), py(s.y[i]), px(s.x[i + 1]), py(s.y[i + 1]),
                s.color);
    }
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        draw_marker(img, px(s.x[i]), py(s.y[i]), s.color);
      }
    }
    for (int dx = 0; dx < 18; ++dx) {
      put_pixel(img, x1 - 110 + dx, legend_y + 3, s.color);
      put_pixel(img, x1 - 110 + dx, legend_y + 4, s.color);
    }
    draw_text(img, x1 - 88, legend_y, s.label, black);
    legend_y += 12;
  }
  return img;
}

}  // namespace far
