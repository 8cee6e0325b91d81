#pragma once

#include <string>
#include <vector>

#include "far/image.hpp"

namespace far {

// Minimal line-plot rendering for report figures; axes, tick labels and a
// legend, nothing interactive.
struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::uint8_t color[3] = {0, 0, 0};
  bool markers = true;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  int width = 640;
  int height = 480;
};

ImageU8 render_plot(const LinePlot& plot);

// 5x7 bitmap text, scale 1; exposed for the renderer and simple annotations.
void draw_text(ImageU8& img, int x, int y, const std::string& text,
               const std::uint8_t color[3]);

}  // namespace far
