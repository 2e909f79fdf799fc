#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/fusion_model.hpp"
#include "mmfuse/image.hpp"
#include "mmfuse/preprocess.hpp"

namespace mmfuse {

enum class Precision { kFloat32, kFloat64 };

std::string_view precision_name(Precision p);  // "float32" / "float64"
Precision parse_precision(std::string_view text);

struct TrainConfig {
  int epochs = 30;
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 4;
  bool augment = true;
  AugmentParams augmentation;
  // Class-aware two-stage sampling; false draws uniformly over samples.
  bool class_aware_sampling = true;
  Precision precision = Precision::kFloat64;
  std::uint64_t seed = 0;

  void validate() const;
};

// One training or evaluation example. `image` is already at the encoder's
// input size; `clinical` is already encoded.
struct Sample {
  std::string image_id;
  std::string subject_id;
  GrayImage image;
  ClinicalVector clinical;
  ClassLabel label = ClassLabel::kBenign;
};

// SGD with classical momentum: v <- momentum * v + g; w <- w - lr * v.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum(double learning_rate, double momentum)
      : lr_(static_cast<T>(learning_rate)), momentum_(static_cast<T>(momentum)) {}

  void step(std::span<Param<T>* const> params);
  const std::vector<std::vector<T>>& velocities() const { return velocity_; }

 private:
  T lr_;
  T momentum_;
  std::vector<std::vector<T>> velocity_;
};

template <typename T>
struct TrainResult {
  FusionModel<T> model;
  std::vector<double> loss_history;  // mean batch loss per epoch
};

// Trains `model` in place for config.epochs x epoch_length(train.size(),
// batch_size) steps. Throws DivergenceError on a non-finite loss.
template <typename T>
std::vector<double> train_model(FusionModel<T>& model, const TrainConfig& config,
                                std::span<const Sample> train, std::uint64_t seed);

// Builds a freshly initialized model for `mode` and trains it.
template <typename T>
TrainResult<T> train_fold(const TrainConfig& config, FusionModelConfig model_config,
                          std::span<const Sample> train, Modality mode, std::uint64_t seed);

}  // namespace mmfuse
