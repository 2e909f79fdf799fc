#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/fusion_model.hpp"
#include "mmfuse/rng.hpp"

namespace testutil {

inline mmfuse::SubjectRecord subject(const std::string& id, mmfuse::ClassLabel label,
                                     double age = 40, double bmi = 25, double size = 2.0,
                                     const std::string& race = "white",
                                     const std::string& meno = "pre",
                                     const std::string& echo = "homogeneous") {
  mmfuse::SubjectRecord r;
  r.subject_id = id;
  r.label = label;
  r.age_years = age;
  r.bmi = bmi;
  r.tumor_size = size;
  r.race = race;
  r.menopausal_status = meno;
  r.echogenicity = echo;
  return r;
}

inline std::vector<mmfuse::SubjectRecord> subjects(int negatives, int positives) {
  std::vector<mmfuse::SubjectRecord> out;
  for (int i = 0; i < negatives + positives; ++i) {
    out.push_back(subject("P" + std::to_string(i),
                          i < negatives ? mmfuse::ClassLabel::kBenign
                                        : mmfuse::ClassLabel::kBorderlineMalignant));
  }
  return out;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mmfuse_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

template <typename F>
mmfuse::ErrorKind error_kind_of(F&& f) {
  try {
    f();
  } catch (const mmfuse::Error& e) {
    return e.kind();
  }
  throw std::runtime_error("expected an mmfuse::Error");
}

// Central-difference check of accumulate_gradients against loss(). Visits
// every `stride`-th coordinate of every parameter and returns the largest
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
inline double max_gradient_error(mmfuse::FusionModel<double>& model,
                                 const std::vector<mmfuse::ImageTensor<double>>& images,
                                 const std::vector<std::vector<double>>& clinical,
                                 const std::vector<mmfuse::ClassLabel>& labels, double step,
                                 std::size_t stride = 1) {
  model.zero_grad();
  model.accumulate_gradients(images, clinical, labels);
  double worst = 0.0;
  for (auto* p : model.parameters()) {
    for (std::size_t i = 0; i < p->size(); i += stride) {
      const double old = p->value[i];
      p->value[i] = old + step;
      const double up = model.loss(images, clinical, labels);
      p->value[i] = old - step;
      const double down = model.loss(images, clinical, labels);
      p->value[i] = old;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  }
  return worst;
}

inline mmfuse::ImageTensor<double> noise_image(mmfuse::Rng& rng, int c, int h, int w) {
  mmfuse::ImageTensor<double> t(c, h, w);
  for (double& v : t.data) v = rng.uniform();
  return t;
}

// Linear "encoder" for hand-checkable attribution: embedding = sum_i w_i x_i
// over the flattened single-channel input, and layer "toy" returns fixed
// activation channels regardless of the input.
class ToyLinearEncoder final : public mmfuse::ImageEncoder<double> {
 public:
  ToyLinearEncoder(int h, int w, std::vector<double> weights,
                   std::vector<mmfuse::ImageTensor<double>> channels)
      : weights_(std::move(weights)), channels_(std::move(channels)) {
    spec_.name = "toy_linear";
    spec_.embedding_dim = 1;
    spec_.input_height = h;
    spec_.input_width = w;
  }

  const mmfuse::EncoderSpec& spec() const override { return spec_; }
  std::vector<double> forward(const mmfuse::ImageTensor<double>& image,
                              std::unique_ptr<Tape>* tape) const override {
    if (tape) *tape = std::make_unique<Tape>();
    double e = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) e += weights_[i] * image.data[i];
    return {e};
  }
  void backward(const Tape&, std::span<const double>) override {}
  mmfuse::ImageTensor<double> layer_activations(const mmfuse::ImageTensor<double>&,
                                                const std::string& layer) const override {
    if (layer != "toy") throw mmfuse::Error(mmfuse::ErrorKind::kUnknownLayer, layer);
    mmfuse::ImageTensor<double> out(static_cast<int>(channels_.size()), channels_[0].height,
                                    channels_[0].width);
    for (std::size_t c = 0; c < channels_.size(); ++c) {
      std::copy(channels_[c].data.begin(), channels_[c].data.end(), out.channel(static_cast<int>(c)));
    }
    return out;
  }
  std::string default_attribution_layer() const override { return "toy"; }
  std::vector<mmfuse::Param<double>*> parameters() override { return {}; }
  std::unique_ptr<mmfuse::ImageEncoder<double>> clone() const override {
    return std::make_unique<ToyLinearEncoder>(*this);
  }

 private:
  mmfuse::EncoderSpec spec_;
  std::vector<double> weights_;
  std::vector<mmfuse::ImageTensor<double>> channels_;
};

inline mmfuse::ImageTensor<double> plane(int h, int w, std::vector<double> values) {
  mmfuse::ImageTensor<double> t(1, h, w);
  t.data = std::move(values);
  return t;
}

// IMAGE_ONLY model over the toy encoder whose positive logit is the embedding
// and whose negative logit is 0.
inline mmfuse::FusionModel<double> toy_image_model(int h, int w, std::vector<double> weights,
                                                   std::vector<mmfuse::ImageTensor<double>> channels) {
  mmfuse::FusionModelConfig cfg;
  cfg.encoder.name = "toy_linear";
  cfg.encoder.embedding_dim = 1;
  cfg.encoder.input_height = h;
  cfg.encoder.input_width = w;
  cfg.modality = mmfuse::Modality::kImageOnly;
  mmfuse::FusionModel<double> m(
      cfg, std::make_unique<ToyLinearEncoder>(h, w, std::move(weights), std::move(channels)), 0);
  m.classifier().weight.value = {0.0, 1.0};
  m.classifier().bias.value = {0.0, 0.0};
  return m;
}

}  // namespace testutil
