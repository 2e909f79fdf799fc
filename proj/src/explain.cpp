#include "mmfuse/explain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/metrics.hpp"
#include "mmfuse/preprocess.hpp"

namespace mmfuse {

GrayImage min_max_normalize(const GrayImage& image, bool* was_constant) {
  GrayImage out(image.height, image.width, 0.0);
  if (image.pixels.empty()) {
    if (was_constant) *was_constant = true;
    return out;
  }
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double range = *hi - *lo;
  if (was_constant) *was_constant = !(range > 0.0);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    out.pixels[i] = (image.pixels[i] - *lo) / range;
  }
  return out;
}

template <typename T>
ScoreCamResult score_cam(const FusionModel<T>& model, const ImageTensor<T>& image,
                         std::span<const T> clinical, std::optional<ClassLabel> target,
                         const std::string& layer) {
  if (model.config().modality == Modality::kClinicalOnly) {
    throw Error(ErrorKind::kConfigError, "score_cam needs a model with an image branch");
  }
  const auto& encoder = model.encoder();
  const std::string layer_name = layer.empty() ? encoder.default_attribution_layer() : layer;
  const ImageTensor<T> acts = encoder.layer_activations(image, layer_name);

  ScoreCamResult result;
  if (!target) {
    const auto z = model.logits(image, clinical);
    target = z[1] > z[0] ? ClassLabel::kBorderlineMalignant : ClassLabel::kBenign;
  }
  const int cls = label_index(*target);
  const int H = image.height;
  const int W = image.width;

  std::vector<GrayImage> channels;
  channels.reserve(acts.channels);
  for (int c = 0; c < acts.channels; ++c) {
    GrayImage small(acts.height, acts.width);
    const T* src = acts.channel(c);
    for (std::size_t i = 0; i < small.pixels.size(); ++i) small.pixels[i] = static_cast<double>(src[i]);
    channels.push_back(min_max_normalize(resize_bilinear(small, H, W)));
    const auto z = model.logits(apply_mask(image, channels.back()), clinical);
    result.channel_logits.push_back(static_cast<double>(z[cls]));
  }

  const double zmax = *std::max_element(result.channel_logits.begin(), result.channel_logits.end());
  double total = 0.0;
  for (double z : result.channel_logits) {
    result.channel_weights.push_back(std::exp(z - zmax));
    total += result.channel_weights.back();
  }
  for (double& w : result.channel_weights) w /= total;

  GrayImage combined(H, W, 0.0);
  for (std::size_t c = 0; c < channels.size(); ++c) {
    const double w = result.channel_weights[c];
    for (std::size_t i = 0; i < combined.pixels.size(); ++i) {
      combined.pixels[i] += w * channels[c].pixels[i];
    }
  }
  for (double& v : combined.pixels) v = std::max(v, 0.0);

  result.map.values = min_max_normalize(combined, &result.constant_map);
  result.map.target_class = *target;
  result.map.layer_name = layer_name;
  return result;
}

GrayImage top_fraction_mask(const GrayImage& attribution, double fraction) {
  const std::size_t n = attribution.pixels.size();
  const auto keep = static_cast<std::size_t>(std::llround(std::clamp(fraction, 0.0, 1.0) * n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return attribution.pixels[a] > attribution.pixels[b];
  });
  GrayImage mask(attribution.height, attribution.width, 0.0);
  for (std::size_t i = 0; i < keep; ++i) mask.pixels[order[i]] = 1.0;
  return mask;
}

GrayImage random_region_mask(int height, int width, double fraction, Rng& rng) {
  const long target = std::lround(std::clamp(fraction, 0.0, 1.0) * height * width);
  int h = std::clamp(static_cast<int>(std::lround(std::sqrt(static_cast<double>(target)))), 1, height);
  int w = std::clamp(static_cast<int>(std::lround(static_cast<double>(target) / h)), 1, width);
  h = std::clamp(static_cast<int>(std::lround(static_cast<double>(target) / w)), 1, height);
  const int y0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
  const int x0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
  GrayImage mask(height, width, 0.0);
  for (int y = y0; y < y0 + h; ++y) {
    for (int x = x0; x < x0 + w; ++x) mask.at(y, x) = 1.0;
  }
  return mask;
}

template <typename T>
ImageTensor<T> apply_mask(const ImageTensor<T>& image, const GrayImage& mask) {
  if (mask.height != image.height || mask.width != image.width) {
    throw Error(ErrorKind::kShapeError, "mask size does not match the image");
  }
  ImageTensor<T> out = image;
  for (int c = 0; c < out.channels; ++c) {
    T* dst = out.channel(c);
    for (std::size_t i = 0; i < out.plane(); ++i) dst[i] *= static_cast<T>(mask.pixels[i]);
  }
  return out;
}

template <typename T>
ContributionScore modality_ablation(const FusionModel<T>& model, const ImageTensor<T>& image,
                                    std::span<const T> clinical) {
  if (model.config().modality != Modality::kMultimodal) {
    throw Error(ErrorKind::kConfigError, "modality ablation needs a MULTIMODAL model");
  }
  const ImageTensor<T> zero_image(image.channels, image.height, image.width, T(0));
  const std::vector<T> zero_clinical(clinical.size(), T(0));
  const double full = static_cast<double>(model.forward(image, clinical));
  const double no_image = static_cast<double>(model.forward(zero_image, clinical));
  const double no_clinical = static_cast<double>(model.forward(image, zero_clinical));

  ContributionScore s;
  s.delta_image = std::abs(full - no_image);
  s.delta_clinical = std::abs(full - no_clinical);
  const double total = s.delta_image + s.delta_clinical;
  if (total == 0.0) {
    s.degenerate = true;
    return s;
  }
  s.image_share = s.delta_image / total;
  s.clinical_share = 1.0 - s.image_share;
  return s;
}

ShareSummary summarize_shares(std::span<const double> shares) {
  if (shares.empty()) throw Error(ErrorKind::kEmptyInput, "no ablation samples to summarize");
  ShareSummary s;
  const double n = static_cast<double>(shares.size());
  s.mean = std::accumulate(shares.begin(), shares.end(), 0.0) / n;
  // Deviations are taken around the first value so constant input gives sd 0.
  const double pivot = shares.front();
  double shift = 0.0;
  for (double v : shares) shift += v - pivot;
  shift /= n;
  double ss = 0.0;
  for (double v : shares) ss += (v - pivot - shift) * (v - pivot - shift);
  s.sd = std::sqrt(ss / n);
  s.min = quantile_linear(shares, 0.0);
  s.q1 = quantile_linear(shares, 0.25);
  s.median = quantile_linear(shares, 0.5);
  s.q3 = quantile_linear(shares, 0.75);
  s.max = quantile_linear(shares, 1.0);
  return s;
}

CohortAblation cohort_ablation(std::vector<AblationRecord> records) {
  if (records.empty()) throw Error(ErrorKind::kEmptyInput, "ablation needs a non-empty validation set");
  CohortAblation c;
  std::vector<double> image;
  std::vector<double> clinical;
  for (const auto& r : records) {
    image.push_back(r.score.image_share);
    clinical.push_back(r.score.clinical_share);
    if (r.score.degenerate) ++c.degenerate;
  }
  c.n = static_cast<long>(records.size());
  c.image = summarize_shares(image);
  c.clinical = summarize_shares(clinical);
  c.records = std::move(records);
  return c;
}

namespace {

nlohmann::json share_json(const ShareSummary& s) {
  return {{"mean", s.mean}, {"sd", s.sd},   {"min", s.min}, {"q1", s.q1},
          {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

}  // namespace

nlohmann::json to_json(const CohortAblation& c) {
  return {{"n", c.n},
          {"degenerate", c.degenerate},
          {"image", share_json(c.image)},
          {"clinical", share_json(c.clinical)},
          {"sd_convention", "population"},
          {"quantile_method", "linear interpolation between order statistics (type 7)"},
          {"baseline", "all-zero image / all-zero clinical vector"}};
}

void write_ablation_csv(const std::filesystem::path& path, std::span<const AblationRecord> records) {
  CsvTable t;
  t.header = {"image_id", "subject_id", "fold", "image_share", "clinical_share", "delta_image",
              "delta_clinical", "degenerate"};
  for (const auto& r : records) {
    t.rows.push_back({r.image_id, r.subject_id, std::to_string(r.fold),
                      format_double(r.score.image_share), format_double(r.score.clinical_share),
                      format_double(r.score.delta_image), format_double(r.score.delta_clinical),
                      r.score.degenerate ? "1" : "0"});
  }
  write_csv(path, t);
}

void write_attribution_csv(const std::filesystem::path& path, const GrayImage& map) {
  std::string text;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x) text += ',';
      text += format_double(map.at(y, x));
    }
    text += '\n';
  }
  write_text_file(path, text);
}

template ScoreCamResult score_cam<float>(const FusionModel<float>&, const ImageTensor<float>&,
                                         std::span<const float>, std::optional<ClassLabel>,
                                         const std::string&);
template ScoreCamResult score_cam<double>(const FusionModel<double>&, const ImageTensor<double>&,
                                          std::span<const double>, std::optional<ClassLabel>,
                                          const std::string&);
template ImageTensor<float> apply_mask<float>(const ImageTensor<float>&, const GrayImage&);
template ImageTensor<double> apply_mask<double>(const ImageTensor<double>&, const GrayImage&);
template ContributionScore modality_ablation<float>(const FusionModel<float>&,
                                                    const ImageTensor<float>&,
                                                    std::span<const float>);
template ContributionScore modality_ablation<double>(const FusionModel<double>&,
                                                     const ImageTensor<double>&,
                                                     std::span<const double>);

}  // namespace mmfuse
