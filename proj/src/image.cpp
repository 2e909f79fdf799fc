#include "mmfuse/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void ensure_parent(const fs::path& path) {
  if (!path.has_parent_path()) return;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::kIoError, "cannot create directory " + path.parent_path().string());
}

void write_png(const fs::path& path, int height, int width, png_uint_32 format,
               const std::uint8_t* data) {
  ensure_parent(path);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.c_str(), 0, data, 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::kIoError, "cannot write PNG " + path.string() + ": " + msg);
  }
}

}  // namespace

RgbImage read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::kUnreadableFile, "cannot read PNG " + path.string() + ": " + msg);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  RgbImage out;
  out.height = static_cast<int>(img.height);
  out.width = static_cast<int>(img.width);
  out.channels = color ? 3 : 1;
  out.data.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw Error(ErrorKind::kUnreadableFile, "cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

void write_png_gray(const fs::path& path, const GrayImage& image) {
  std::vector<std::uint8_t> bytes(image.pixels.size());
  std::transform(image.pixels.begin(), image.pixels.end(), bytes.begin(), to_byte);
  write_png(path, image.height, image.width, PNG_FORMAT_GRAY, bytes.data());
}

void write_png_rgb(const fs::path& path, const RgbImage& image) {
  if (image.channels != 3) throw Error(ErrorKind::kShapeError, "write_png_rgb expects 3 channels");
  write_png(path, image.height, image.width, PNG_FORMAT_RGB, image.data.data());
}

GrayImage quantize_8bit(GrayImage image) {
  for (double& p : image.pixels) p = static_cast<double>(to_byte(p)) / 255.0;
  return image;
}

}  // namespace mmfuse
