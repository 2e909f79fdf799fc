#include "mmfuse/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mmfuse/errors.hpp"

namespace mmfuse {

GrayImage resize_bilinear(const GrayImage& image, int height, int width) {
  if (height < 1 || width < 1 || image.height < 1 || image.width < 1) {
    throw Error(ErrorKind::kShapeError, "resize_bilinear: empty image or target");
  }
  if (height == image.height && width == image.width) return image;
  GrayImage out(height, width);
  const double sy = static_cast<double>(image.height) / height;
  const double sx = static_cast<double>(image.width) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(image.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, image.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(image.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, image.width - 1);
      const double wx = fx - x0;
      const double top = image.at(y0, x0) * (1.0 - wx) + image.at(y0, x1) * wx;
      const double bot = image.at(y1, x0) * (1.0 - wx) + image.at(y1, x1) * wx;
      out.at(y, x) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

GrayImage preprocess_for_model(const GrayImage& image, int height, int width) {
  GrayImage out = resize_bilinear(image, height, width);
  for (double& p : out.pixels) p = std::clamp(p, 0.0, 1.0);
  return out;
}

GrayImage flip_horizontal(const GrayImage& image) {
  GrayImage out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) out.at(y, x) = image.at(y, image.width - 1 - x);
  }
  return out;
}

GrayImage rotate(const GrayImage& image, double degrees) {
  if (degrees == 0.0) return image;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  const double cy = (image.height - 1) / 2.0;
  const double cx = (image.width - 1) / 2.0;
  auto sample = [&image](int y, int x) {
    if (y < 0 || x < 0 || y >= image.height || x >= image.width) return 0.0;
    return image.at(y, x);
  };
  GrayImage out(image.height, image.width);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      // Inverse map: rotate the destination offset by -angle.
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = c * dx - s * dy + cx;
      const double sy = s * dx + c * dy + cy;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0;
      const double wy = sy - y0;
      const double top = sample(y0, x0) * (1.0 - wx) + sample(y0, x0 + 1) * wx;
      const double bot = sample(y0 + 1, x0) * (1.0 - wx) + sample(y0 + 1, x0 + 1) * wx;
      out.at(y, x) = top * (1.0 - wy) + bot * wy;
    }
  }
  return out;
}

GrayImage augment(const GrayImage& image, Rng& rng, const AugmentParams& params) {
  const bool flip = rng.bernoulli(params.flip_probability);
  const double angle = rng.uniform(-params.max_rotation_deg, params.max_rotation_deg);
  GrayImage out = flip ? flip_horizontal(image) : image;
  return rotate(out, angle);
}

}  // namespace mmfuse
