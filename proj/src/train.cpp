#include "mmfuse/train.hpp"

#include <cmath>

#include "mmfuse/csv.hpp"
#include "mmfuse/errors.hpp"
#include "mmfuse/sampling.hpp"

namespace mmfuse {

std::string_view precision_name(Precision p) {
  return p == Precision::kFloat32 ? "float32" : "float64";
}

Precision parse_precision(std::string_view text) {
  if (text == "float32") return Precision::kFloat32;
  if (text == "float64") return Precision::kFloat64;
  throw Error(ErrorKind::kConfigError, "precision must be float32 or float64, got '" +
                                           std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorKind::kConfigError, "train.learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorKind::kConfigError, "train.momentum must be in [0, 1)");
  }
  if (batch_size < 1) throw Error(ErrorKind::kConfigError, "train.batch_size must be >= 1");
  if (epochs < 0) throw Error(ErrorKind::kConfigError, "train.epochs must be >= 0");
  if (!(augmentation.flip_probability >= 0.0 && augmentation.flip_probability <= 1.0)) {
    throw Error(ErrorKind::kConfigError, "train.flip_probability must be in [0, 1]");
  }
  if (!(augmentation.max_rotation_deg >= 0.0)) {
    throw Error(ErrorKind::kConfigError, "train.max_rotation_deg must be >= 0");
  }
}

template <typename T>
void SgdMomentum<T>::step(std::span<Param<T>* const> params) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const auto* p : params) velocity_.emplace_back(p->size(), T(0));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = velocity_[i];
    auto& w = params[i]->value;
    const auto& g = params[i]->grad;
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = momentum_ * v[j] + g[j];
      w[j] -= lr_ * v[j];
    }
  }
}

template <typename T>
std::vector<double> train_model(FusionModel<T>& model, const TrainConfig& config,
                                std::span<const Sample> train, std::uint64_t seed) {
  config.validate();
  if (train.empty()) throw Error(ErrorKind::kEmptyInput, "train_fold: empty training set");
  std::vector<ClassLabel> labels;
  for (const auto& s : train) labels.push_back(s.label);
  auto groups = group_by_class(labels);
  if (groups.size() < kNumClasses) {
    throw Error(ErrorKind::kEmptyClass, "train_fold: training set lacks one of the classes");
  }

  ClassAwareSampler class_aware(std::move(groups), derive_seed(seed, {1}));
  RandomSampler plain(train.size(), derive_seed(seed, {1}));
  Rng aug_rng(derive_seed(seed, {2}));
  SgdMomentum<T> optimizer(config.learning_rate, config.momentum);
  const bool uses_image = model.config().modality != Modality::kClinicalOnly;
  const auto params = model.parameters();
  const std::size_t steps = epoch_length(train.size(), static_cast<std::size_t>(config.batch_size));

  std::vector<double> history;
  history.reserve(config.epochs);
  std::vector<ImageTensor<T>> images;
  std::vector<std::vector<T>> clinical;
  std::vector<ClassLabel> batch_labels;
  const auto& spec = model.config().encoder;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t step = 0; step < steps; ++step) {
      const auto batch = config.class_aware_sampling
                             ? class_aware.next_batch(config.batch_size)
                             : plain.next_batch(config.batch_size);
      images.clear();
      clinical.clear();
      batch_labels.clear();
      for (std::size_t id : batch) {
        const Sample& s = train[id];
        if (uses_image) {
          images.push_back(model.prepare_image(
              config.augment ? augment(s.image, aug_rng, config.augmentation) : s.image));
        } else {
          images.emplace_back(spec.input_channels, spec.input_height, spec.input_width);
        }
        clinical.emplace_back(s.clinical.begin(), s.clinical.end());
        batch_labels.push_back(s.label);
      }
      model.zero_grad();
      const T loss = model.accumulate_gradients(images, clinical, batch_labels);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw Error(ErrorKind::kDivergence,
                    "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                        std::to_string(step) + " (seed " + std::to_string(seed) +
                        ", learning_rate " + format_double(config.learning_rate) +
                        ", batch_size " + std::to_string(config.batch_size) + ")");
      }
      optimizer.step(params);
      epoch_loss += static_cast<double>(loss);
    }
    history.push_back(epoch_loss / static_cast<double>(steps));
  }
  return history;
}

template <typename T>
TrainResult<T> train_fold(const TrainConfig& config, FusionModelConfig model_config,
                          std::span<const Sample> train, Modality mode, std::uint64_t seed) {
  model_config.modality = mode;
  FusionModel<T> model(std::move(model_config), derive_seed(seed, {0}));
  auto history = train_model(model, config, train, seed);
  return {std::move(model), std::move(history)};
}

template class SgdMomentum<float>;
template class SgdMomentum<double>;
template std::vector<double> train_model<float>(FusionModel<float>&, const TrainConfig&,
                                                std::span<const Sample>, std::uint64_t);
template std::vector<double> train_model<double>(FusionModel<double>&, const TrainConfig&,
                                                 std::span<const Sample>, std::uint64_t);
template TrainResult<float> train_fold<float>(const TrainConfig&, FusionModelConfig,
                                              std::span<const Sample>, Modality, std::uint64_t);
template TrainResult<double> train_fold<double>(const TrainConfig&, FusionModelConfig,
                                                std::span<const Sample>, Modality, std::uint64_t);

}  // namespace mmfuse
