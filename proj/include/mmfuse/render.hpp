#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mmfuse/image.hpp"
#include "mmfuse/metrics.hpp"

namespace mmfuse {

struct RocSeries {
  std::string label;
  std::vector<RocPoint> points;
};

// ROC curves on one unit-square plot with the chance diagonal and a legend.
RgbImage render_roc_plot(const std::vector<RocSeries>& series, int size = 480);

// Jet colormap of v in [0, 1].
std::array<std::uint8_t, 3> jet_color(double v);

// Grayscale image blended with the jet-colored attribution map:
// (1 - alpha) * gray + alpha * jet(map). Sizes must match.
RgbImage render_cam_overlay(const GrayImage& image, const GrayImage& map, double alpha = 0.4);

}  // namespace mmfuse
