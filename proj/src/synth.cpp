#include "mmfuse/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

namespace {

constexpr int kHarmonics = 5;  // boundary harmonics 3..7
// Latent scales; the spreads are label-independent.
constexpr double kTextureSpread = 0.3;
constexpr double kTextureGain = 0.15;
constexpr double kIrregularitySpread = 0.25;
constexpr double kIrregularityGain = 0.12;

struct SubjectShape {
  LesionLatents base;
  std::array<double, kHarmonics> amplitude{};
  std::array<double, kHarmonics> phase{};
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::string pick(Rng& rng, const std::vector<std::string>& values, const std::vector<double>& probs) {
  double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    if (u < probs[i]) return values[i];
    u -= probs[i];
  }
  return values.back();
}

void fail(const std::string& field, const std::string& what) {
  throw Error(ErrorKind::kConfigError, "field synth." + field + ": " + what);
}

// Per-pixel Gaussian speckle.
std::vector<double> texture_field(int h, int w, double sd, Rng& rng) {
  std::vector<double> out(static_cast<std::size_t>(h) * w);
  for (double& v : out) v = rng.normal(0.0, sd);
  return out;
}

GrayImage render(const SubjectShape& shape, const LesionLatents& pose, int h, int w,
                 const std::vector<double>& texture, double gradient) {
  GrayImage img(h, w);
  const double side = std::min(h, w);
  const double cy = pose.center_y * h;
  const double cx = pose.center_x * w;
  const double a = pose.semi_major * side;
  const double b = pose.semi_minor * side;
  const double c = std::cos(pose.orientation);
  const double s = std::sin(pose.orientation);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dy = y + 0.5 - cy;
      const double dx = x + 0.5 - cx;
      const double u = (c * dx + s * dy) / a;
      const double v = (-s * dx + c * dy) / b;
      const double rho = std::hypot(u, v);
      const double phi = std::atan2(v, u);
      double boundary = 1.0;
      for (int k = 0; k < kHarmonics; ++k) {
        boundary += pose.irregularity * shape.amplitude[k] * std::cos((k + 3) * phi + shape.phase[k]);
      }
      const double inside = std::clamp((boundary - rho) * b + 0.5, 0.0, 1.0);
      const double bg = pose.background_level * (1.0 + gradient * (static_cast<double>(y) / h - 0.5));
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      img.pixels[i] = bg + inside * (pose.lesion_level - bg + texture[i]);
    }
  }
  return img;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_subjects < 4) fail("n_subjects", "must be >= 4");
  if (images_min < 1) fail("images_min", "must be >= 1");
  if (images_max < images_min) fail("images_max", "must be >= images_min");
  if (!(positive_fraction > 0.0 && positive_fraction < 1.0)) {
    fail("positive_fraction", "must be in (0, 1)");
  }
  if (image_height < kMinImageSide || image_width < kMinImageSide) {
    fail("image_size", "sides must be >= " + std::to_string(kMinImageSide));
  }
  if (!(image_signal >= 0.0)) fail("image_signal", "must be >= 0");
  if (!(clinical_signal >= 0.0)) fail("clinical_signal", "must be >= 0");
  if (!(noise_sd >= 0.0)) fail("noise_sd", "must be >= 0");
  const long positives = std::lround(n_subjects * positive_fraction);
  if (positives < 2 || n_subjects - positives < 2) {
    fail("positive_fraction", "every class needs at least 2 subjects");
  }
}

SynthDataset generate(const SynthConfig& config) {
  config.validate();
  const int n = config.n_subjects;
  const long positives = std::lround(n * config.positive_fraction);

  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + positives, 1);
  Rng label_rng(derive_seed(config.seed, {0}));
  label_rng.shuffle(std::span<int>(labels));

  const int width = std::max(3, static_cast<int>(std::to_string(n).size()));
  const double is = config.image_signal;
  const double cs = config.clinical_signal;
  const int H = config.image_height;
  const int W = config.image_width;

  SynthDataset out;
  for (int i = 0; i < n; ++i) {
    Rng rng(derive_seed(config.seed, {1, static_cast<std::uint64_t>(i)}));
    const int y = labels[i];

    SubjectRecord rec;
    std::string id = std::to_string(i + 1);
    rec.subject_id = "S" + std::string(width - id.size(), '0') + id;
    rec.label = y ? ClassLabel::kBorderlineMalignant : ClassLabel::kBenign;

    SubjectShape shape;
    LesionLatents& L = shape.base;
    L.center_y = rng.uniform(0.4, 0.6);
    L.center_x = rng.uniform(0.4, 0.6);
    L.semi_major = rng.uniform(0.22, 0.34);
    L.semi_minor = L.semi_major * rng.uniform(0.55, 0.9);
    L.orientation = rng.uniform(0.0, std::numbers::pi);
    L.irregularity = rng.uniform(0.0, 0.05);
    L.irregularity += kIrregularitySpread * rng.uniform();
    L.irregularity += kIrregularityGain * is * y * rng.uniform(0.4, 1.6);
    L.texture_sd = rng.uniform(0.01, 0.03);
    L.texture_sd += kTextureSpread * rng.uniform();
    L.texture_sd += kTextureGain * is * y * rng.uniform(0.5, 1.5);
    L.lesion_level = rng.uniform(0.15, 0.35);
    L.background_level = rng.uniform(0.5, 0.7);
    for (int k = 0; k < kHarmonics; ++k) {
      shape.amplitude[k] = rng.uniform(0.4, 1.0);
      shape.phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    rec.age_years = std::clamp(rng.normal(38.0 + 12.0 * cs * y, 13.0), 15.0, 90.0);
    rec.bmi = std::clamp(rng.normal(26.0, 5.0), 15.0, 50.0);
    rec.tumor_size = std::clamp(rng.normal(3.0 + 2.25 * cs * y, 1.2), 0.3, 20.0);
    rec.race = pick(rng, {"white", "black", "other"}, {0.6, 0.25, 0.15});
    rec.menopausal_status =
        rng.bernoulli(sigmoid(logit(0.3) + 1.8 * cs * y)) ? "post" : "pre";
    rec.echogenicity =
        rng.bernoulli(sigmoid(logit(0.3) + 2.25 * cs * y)) ? "heterogeneous" : "homogeneous";

    const int count = config.images_min +
                      static_cast<int>(rng.below(static_cast<std::uint64_t>(
                          config.images_max - config.images_min + 1)));
    const double gradient = rng.uniform(-0.2, 0.2);
    Rng shared_rng(derive_seed(config.seed, {3, static_cast<std::uint64_t>(i)}));
    const auto shared_texture = texture_field(H, W, L.texture_sd, shared_rng);

    for (int j = 0; j < count; ++j) {
      Rng img_rng(derive_seed(config.seed, {2, static_cast<std::uint64_t>(i),
                                            static_cast<std::uint64_t>(j)}));
      LesionLatents pose = L;
      std::vector<double> texture;
      if (config.duplicate_images) {
        texture = shared_texture;
      } else {
        pose.center_y += img_rng.uniform(-0.04, 0.04);
        pose.center_x += img_rng.uniform(-0.04, 0.04);
        const double scale = img_rng.uniform(0.92, 1.08);
        pose.semi_major *= scale;
        pose.semi_minor *= scale;
        pose.orientation += img_rng.uniform(-0.15, 0.15);
        texture = texture_field(H, W, L.texture_sd, img_rng);
      }
      GrayImage img = render(shape, pose, H, W, texture, gradient);
      for (double& p : img.pixels) p = std::clamp(p + img_rng.normal(0.0, config.noise_sd), 0.0, 1.0);

      ImageRecord ir;
      ir.image_id = rec.subject_id + "_" + std::to_string(j);
      ir.subject_id = rec.subject_id;
      ir.pixels = quantize_8bit(std::move(img));
      ir.source_path = "images/" + ir.image_id + ".png";
      out.images.push_back(std::move(ir));
    }
    out.subjects.push_back(std::move(rec));
    out.latents.push_back(L);
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SynthDataset& dataset) {
  std::filesystem::create_directories(dir / "images");
  write_clinical_csv(dir / "clinical.csv", dataset.subjects);
  CsvTable manifest;
  manifest.header = {"image_path", "subject_id"};
  for (const auto& img : dataset.images) {
    const std::string rel = "images/" + img.image_id + ".png";
    write_png_gray(dir / rel, img.pixels);
    manifest.rows.push_back({rel, img.subject_id});
  }
  write_csv(dir / "manifest.csv", manifest);
}

}  // namespace mmfuse
