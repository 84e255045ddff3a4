#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "lgtd/tensor.hpp"

namespace lgtd {

using Rgb = std::array<double, 3>;

struct Series {
  std::string label;
  std::vector<double> x, y;
  Rgb color{0.12, 0.35, 0.75};
  bool line = true;
  bool markers = false;
};

struct PlotSpec {
  std::string title, x_label, y_label;
  std::vector<Series> series;
  int width = 720;
  int height = 440;
};

/// Rasterises a line/scatter chart with axes, ticks, labels and a legend
/// into a [3, height, width] image. Non-finite points are skipped.
Tensor render_plot(const PlotSpec& spec);
void write_plot(const std::filesystem::path& path, const PlotSpec& spec);

/// Distinguishable colour for series `i`.
Rgb palette(std::size_t i);

/// Round tick positions covering [lo, hi], roughly `target` of them.
std::vector<double> nice_ticks(double lo, double hi, int target = 5);

}  // namespace lgtd
