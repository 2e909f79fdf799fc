#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmfuse/core_data.hpp"
#include "mmfuse/fusion_model.hpp"
#include "mmfuse/image.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

struct AttributionMap {
  GrayImage values;  // model input size, in [0, 1]
  ClassLabel target_class = ClassLabel::kBorderlineMalignant;
  std::string layer_name;
  std::string image_id;
};

struct ScoreCamResult {
  AttributionMap map;
  std::vector<double> channel_weights;  // softmax of channel_logits
  std::vector<double> channel_logits;   // target logit of each masked input
  bool constant_map = false;            // pre-normalization map was flat
};

// Score-CAM over the image branch. `image` must already be at the encoder's
// input size; the clinical vector is held fixed for every masked pass. With no
// target the predicted class is explained; an empty layer name selects the
// encoder's default (last convolution).
template <typename T>
ScoreCamResult score_cam(const FusionModel<T>& model, const ImageTensor<T>& image,
                         std::span<const T> clinical,
                         std::optional<ClassLabel> target = std::nullopt,
                         const std::string& layer = "");

// Min-max to [0, 1]; a constant image maps to zeros.
GrayImage min_max_normalize(const GrayImage& image, bool* was_constant = nullptr);

// 1 on the `fraction` of pixels with the highest attribution (ties broken by
// position), 0 elsewhere.
GrayImage top_fraction_mask(const GrayImage& attribution, double fraction);
// Axis-aligned rectangle of roughly fraction * H * W pixels, as close to
// square as fits, at a uniformly drawn position.
GrayImage random_region_mask(int height, int width, double fraction, Rng& rng);
// Multiplies every channel of `image` by `mask`.
template <typename T>
ImageTensor<T> apply_mask(const ImageTensor<T>& image, const GrayImage& mask);

struct ContributionScore {
  double image_share = 0.5;
  double clinical_share = 0.5;
  double delta_image = 0.0;
  double delta_clinical = 0.0;
  bool degenerate = false;  // both deltas were zero
};

// Drop-based ablation: prediction change when the image (all-zero pixels) or
// the clinical vector (all zeros) is removed. Requires a MULTIMODAL model.
template <typename T>
ContributionScore modality_ablation(const FusionModel<T>& model, const ImageTensor<T>& image,
                                    std::span<const T> clinical);

struct AblationRecord {
  std::string image_id;
  std::string subject_id;
  int fold = 0;
  ContributionScore score;
};

struct ShareSummary {
  double mean = 0.0;
  double sd = 0.0;  // population sd
  double min = 0.0;
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double max = 0.0;
};

struct CohortAblation {
  long n = 0;
  long degenerate = 0;
  ShareSummary image;
  ShareSummary clinical;
  std::vector<AblationRecord> records;
};

// Throws EmptyInput on an empty record list.
CohortAblation cohort_ablation(std::vector<AblationRecord> records);
ShareSummary summarize_shares(std::span<const double> shares);

nlohmann::json to_json(const CohortAblation& cohort);
void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRecord> records);
void write_attribution_csv(const std::filesystem::path& path, const GrayImage& map);

}  // namespace mmfuse
