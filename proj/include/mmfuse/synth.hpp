#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/ingest.hpp"

namespace mmfuse {

struct SynthConfig {
  int n_subjects = 80;
  int images_min = 2;  // images per subject, inclusive range
  int images_max = 4;
  double positive_fraction = 0.25;
  int image_height = 64;
  int image_width = 64;
  double image_signal = 1.0;
  double clinical_signal = 1.0;
  double noise_sd = 0.05;
  std::uint64_t seed = 0;
  // All images of a subject come from one rendering of the lesion and differ
  // only in pixel noise (near-duplicate frames).
  bool duplicate_images = false;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

// Generating parameters of one subject's lesion.
struct LesionLatents {
  double center_y = 0.0;  // fractions of the image side
  double center_x = 0.0;
  double semi_major = 0.0;
  double semi_minor = 0.0;
  double orientation = 0.0;  // radians
  double irregularity = 0.0;
  double texture_sd = 0.0;
  double lesion_level = 0.0;
  double background_level = 0.0;
};

struct SynthDataset {
  std::vector<SubjectRecord> subjects;
  std::vector<ImageRecord> images;
  std::vector<LesionLatents> latents;  // parallel to subjects
};

// Deterministic in the config (seed included).
SynthDataset generate(const SynthConfig& config);

// Writes clinical.csv, manifest.csv and images/<image_id>.png under `dir`, in
// the format load_clinical_csv / load_manifest read.
void write_dataset(const std::filesystem::path& dir, const SynthDataset& dataset);

}  // namespace mmfuse
