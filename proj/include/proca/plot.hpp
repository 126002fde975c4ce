#pragma once

#include <array>
#include <string>
#include <vector>

namespace proca {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::array<std::uint8_t, 3> color{40, 90, 200};
};

/// Renders a line chart to an 8-bit RGB PNG with fixed geometry, axis ticks
/// and a small bitmap font. Output bytes depend only on the inputs.
void plot_lines(const std::string& path, const std::string& title,
                const std::vector<PlotSeries>& series, int width = 720, int height = 420);

/// Renders a bar chart (one bar per value, labeled by index starting at 1).
void plot_bars(const std::string& path, const std::string& title,
               const std::vector<double>& values, int width = 720, int height = 420);

}  // namespace proca
