#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/image.hpp"

namespace mmfuse {

inline constexpr int kMinImageSide = 8;

struct ImageRecord {
  std::string image_id;
  std::string subject_id;
  GrayImage pixels;
  std::string source_path;
  std::optional<int> frame_index;
};

// Border margins, either in pixels or as fractions of the side length
// (rounded to the nearest pixel, fractions limited to [0, 0.45]).
struct CropSpec {
  enum class Unit { kPixels, kFraction };
  Unit unit = Unit::kPixels;
  double top = 0.0;
  double bottom = 0.0;
  double left = 0.0;
  double right = 0.0;

  bool is_identity() const { return top == 0 && bottom == 0 && left == 0 && right == 0; }
};

// BT.601 luma, round(0.299 R + 0.587 G + 0.114 B) / 255. Throws ShapeError
// unless the input has exactly three channels.
GrayImage to_grayscale(const RgbImage& rgb);

// Throws DegenerateCrop if fewer than 8x8 pixels would remain.
ImageRecord crop_borders(const ImageRecord& image, const CropSpec& spec);
GrayImage crop_pixels(const GrayImage& image, const CropSpec& spec);

// Drops exact-pixel duplicates, keeping first occurrences in input order.
std::vector<ImageRecord> dedupe(std::vector<ImageRecord> images);

// Optional hook for non-PNG sources (DICOM stills or cine loops): returns the
// decoded frame `frame_index` (or the only frame) of the file.
using FrameDecoder =
    std::function<RgbImage(const std::filesystem::path& path, std::optional<int> frame_index)>;

struct ManifestOptions {
  CropSpec crop;
  bool remove_duplicates = true;
  FrameDecoder decoder;  // used for entries whose extension is not .png
};

// Reads a manifest CSV (image_path, subject_id, optional frame_index); image
// paths are resolved relative to the manifest's directory. Every image must
// belong to one of `subjects`. Problems are collected across all rows and
// raised together (OrphanImage takes precedence over UnreadableFile).
std::vector<ImageRecord> load_manifest(const std::filesystem::path& manifest_path,
                                       std::span<const SubjectRecord> subjects,
                                       const ManifestOptions& options = {});

// Normalized grayscale cache: <dir>/images/<image_id>.png plus <dir>/index.csv
// with columns image_id, subject_id, H, W, source_path.
void write_image_cache(const std::filesystem::path& dir, std::span<const ImageRecord> images);

// Throws OrphanImage if any image references an unknown subject.
void check_referential_integrity(std::span<const ImageRecord> images,
                                 std::span<const SubjectRecord> subjects);

}  // namespace mmfuse
