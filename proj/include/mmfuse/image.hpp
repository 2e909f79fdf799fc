#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mmfuse {

// Row-major single-channel image with intensities in [0, 1].
struct GrayImage {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {}

  double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const GrayImage&) const = default;
};

// Interleaved 8-bit image, `channels` values per pixel.
struct RgbImage {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;
};

// Decoded PNG: gray images come back with channels == 1.
RgbImage read_png(const std::filesystem::path& path);

// Quantizes to 8 bits (round to nearest) and writes a grayscale PNG.
void write_png_gray(const std::filesystem::path& path, const GrayImage& image);
void write_png_rgb(const std::filesystem::path& path, const RgbImage& image);

// Rounds every intensity to the nearest multiple of 1/255, the precision of
// an 8-bit PNG round trip.
GrayImage quantize_8bit(GrayImage image);

}  // namespace mmfuse
