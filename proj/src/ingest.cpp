#include "mmfuse/ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <unordered_map>
#include <unordered_set>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"

namespace mmfuse {

namespace fs = std::filesystem;

GrayImage to_grayscale(const RgbImage& rgb) {
  const auto expected = static_cast<std::size_t>(rgb.height) * rgb.width * 3;
  if (rgb.channels != 3 || rgb.height <= 0 || rgb.width <= 0 || rgb.data.size() != expected) {
    throw Error(ErrorKind::kShapeError, "to_grayscale expects an HxWx3 image");
  }
  GrayImage out(rgb.height, rgb.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const int r = rgb.data[3 * i];
    const int g = rgb.data[3 * i + 1];
    const int b = rgb.data[3 * i + 2];
    // Integer form of round-half-up on non-negative values; exact.
    const int luma = (299 * r + 587 * g + 114 * b + 500) / 1000;
    out.pixels[i] = static_cast<double>(luma) / 255.0;
  }
  return out;
}

namespace {

struct Margins {
  int top, bottom, left, right;
};

Margins resolve_margins(const CropSpec& spec, int height, int width) {
  auto check = [](double v) {
    if (!(v >= 0.0)) throw Error(ErrorKind::kDegenerateCrop, "crop margins must be non-negative");
  };
  check(spec.top);
  check(spec.bottom);
  check(spec.left);
  check(spec.right);
  if (spec.unit == CropSpec::Unit::kFraction) {
    for (double f : {spec.top, spec.bottom, spec.left, spec.right}) {
      if (f > 0.45) throw Error(ErrorKind::kDegenerateCrop, "fractional margin exceeds 0.45");
    }
    return {static_cast<int>(std::lround(spec.top * height)),
            static_cast<int>(std::lround(spec.bottom * height)),
            static_cast<int>(std::lround(spec.left * width)),
            static_cast<int>(std::lround(spec.right * width))};
  }
  return {static_cast<int>(spec.top), static_cast<int>(spec.bottom), static_cast<int>(spec.left),
          static_cast<int>(spec.right)};
}

std::uint64_t hash_image(const GrayImage& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto feed = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  feed(&img.height, sizeof img.height);
  feed(&img.width, sizeof img.width);
  feed(img.pixels.data(), img.pixels.size() * sizeof(double));
  return h;
}

}  // namespace

GrayImage crop_pixels(const GrayImage& image, const CropSpec& spec) {
  const Margins m = resolve_margins(spec, image.height, image.width);
  const int h = image.height - m.top - m.bottom;
  const int w = image.width - m.left - m.right;
  if (h < kMinImageSide || w < kMinImageSide) {
    throw Error(ErrorKind::kDegenerateCrop, "crop leaves " + std::to_string(std::max(h, 0)) + "x" +
                                                std::to_string(std::max(w, 0)) +
                                                " pixels (minimum 8x8)");
  }
  GrayImage out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.at(y, x) = image.at(y + m.top, x + m.left);
  }
  return out;
}

ImageRecord crop_borders(const ImageRecord& image, const CropSpec& spec) {
  ImageRecord out = image;
  out.pixels = crop_pixels(image.pixels, spec);
  return out;
}

std::vector<ImageRecord> dedupe(std::vector<ImageRecord> images) {
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> kept_by_hash;
  std::vector<ImageRecord> out;
  out.reserve(images.size());
  for (auto& img : images) {
    auto& bucket = kept_by_hash[hash_image(img.pixels)];
    bool duplicate = false;
    for (std::size_t k : bucket) {
      if (out[k].pixels == img.pixels) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) continue;
    bucket.push_back(out.size());
    out.push_back(std::move(img));
  }
  return out;
}

void check_referential_integrity(std::span<const ImageRecord> images,
                                 std::span<const SubjectRecord> subjects) {
  std::unordered_set<std::string> ids;
  for (const auto& s : subjects) ids.insert(s.subject_id);
  std::vector<std::string> orphans;
  for (const auto& img : images) {
    if (!ids.count(img.subject_id)) {
      orphans.push_back("image " + img.image_id + " references unknown subject " + img.subject_id);
    }
  }
  if (!orphans.empty()) {
    throw Error(ErrorKind::kOrphanImage, "images reference unknown subjects", std::move(orphans));
  }
}

std::vector<ImageRecord> load_manifest(const fs::path& manifest_path,
                                       std::span<const SubjectRecord> subjects,
                                       const ManifestOptions& options) {
  const CsvTable table = read_csv(manifest_path);
  const auto path_col = table.column("image_path");
  const auto subject_col = table.column("subject_id");
  const auto frame_col = table.column("frame_index");
  if (!path_col || !subject_col) {
    throw Error(ErrorKind::kMissingField,
                manifest_path.string() + ": manifest needs image_path and subject_id columns");
  }
  std::unordered_set<std::string> known;
  for (const auto& s : subjects) known.insert(s.subject_id);

  const fs::path base = manifest_path.parent_path();
  std::vector<ImageRecord> out;
  std::vector<std::string> orphans;
  std::vector<std::string> unreadable;
  std::unordered_set<std::string> seen_ids;

  for (const auto& row : table.rows) {
    const std::string rel = *path_col < row.size() ? row[*path_col] : "";
    const std::string subject = *subject_col < row.size() ? row[*subject_col] : "";
    std::optional<int> frame;
    if (frame_col && *frame_col < row.size() && !row[*frame_col].empty()) {
      int f = 0;
      const auto& cell = row[*frame_col];
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), f);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        unreadable.push_back(rel + ": bad frame_index '" + cell + "'");
        continue;
      }
      frame = f;
    }
    if (!known.count(subject)) {
      orphans.push_back(rel + ": unknown subject " + subject);
      continue;
    }
    const fs::path full = base / rel;
    RgbImage raw;
    try {
      const bool png = full.extension() == ".png" || full.extension() == ".PNG";
      raw = (!png && options.decoder) ? options.decoder(full, frame) : read_png(full);
    } catch (const Error&) {
      unreadable.push_back(full.string());
      continue;
    }
    ImageRecord rec;
    rec.subject_id = subject;
    rec.source_path = rel;
    rec.frame_index = frame;
    rec.image_id = fs::path(rel).stem().string();
    if (frame) rec.image_id += "_f" + std::to_string(*frame);
    if (!seen_ids.insert(rec.image_id).second) {
      throw Error(ErrorKind::kConfigError, "duplicate image id '" + rec.image_id + "' in manifest");
    }
    if (raw.channels == 3) {
      rec.pixels = to_grayscale(raw);
    } else {
      rec.pixels = GrayImage(raw.height, raw.width);
      for (std::size_t i = 0; i < rec.pixels.pixels.size(); ++i) {
        rec.pixels.pixels[i] = static_cast<double>(raw.data[i]) / 255.0;
      }
    }
    if (!options.crop.is_identity()) rec.pixels = crop_pixels(rec.pixels, options.crop);
    out.push_back(std::move(rec));
  }
  if (!orphans.empty()) {
    throw Error(ErrorKind::kOrphanImage, manifest_path.string() + ": images of unknown subjects",
                std::move(orphans));
  }
  if (!unreadable.empty()) {
    throw Error(ErrorKind::kUnreadableFile, manifest_path.string() + ": unreadable entries",
                std::move(unreadable));
  }
  if (options.remove_duplicates) out = dedupe(std::move(out));
  return out;
}

void write_image_cache(const fs::path& dir, std::span<const ImageRecord> images) {
  CsvTable index;
  index.header = {"image_id", "subject_id", "H", "W", "source_path"};
  for (const auto& img : images) {
    write_png_gray(dir / "images" / (img.image_id + ".png"), img.pixels);
    index.rows.push_back({img.image_id, img.subject_id, std::to_string(img.pixels.height),
                          std::to_string(img.pixels.width), img.source_path});
  }
  write_csv(dir / "index.csv", index);
}

}  // namespace mmfuse
