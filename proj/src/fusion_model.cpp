#include "mmfuse/fusion_model.hpp"

#include <cmath>

#include "mmfuse/errors.hpp"

namespace mmfuse {

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::kMultimodal: return "MULTIMODAL";
    case Modality::kImageOnly: return "IMAGE_ONLY";
    case Modality::kClinicalOnly: return "CLINICAL_ONLY";
  }
  return "?";
}

Modality parse_modality(std::string_view text) {
  if (text == "MULTIMODAL") return Modality::kMultimodal;
  if (text == "IMAGE_ONLY") return Modality::kImageOnly;
  if (text == "CLINICAL_ONLY") return Modality::kClinicalOnly;
  throw Error(ErrorKind::kConfigError, "unknown mode '" + std::string(text) +
                                           "' (expected MULTIMODAL, IMAGE_ONLY or CLINICAL_ONLY)");
}

int FusionModelConfig::fused_dim() const {
  switch (modality) {
    case Modality::kMultimodal: return encoder.embedding_dim + clinical_dims[2];
    case Modality::kImageOnly: return encoder.embedding_dim;
    case Modality::kClinicalOnly: return clinical_dims[2];
  }
  return 0;
}

void FusionModelConfig::validate() const {
  if (num_classes != kNumClasses) throw Error(ErrorKind::kConfigError, "num_classes must be 2");
  for (int d : clinical_dims) {
    if (d < 1) throw Error(ErrorKind::kConfigError, "clinical_dims entries must be >= 1");
  }
  if (encoder.embedding_dim < 1) throw Error(ErrorKind::kConfigError, "embedding_dim must be >= 1");
}

template <typename T>
FusionModel<T>::FusionModel(FusionModelConfig config, std::uint64_t seed)
    : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  encoder_ = EncoderRegistry<T>::instance().create(config_.encoder, rng);
  clinical1_ = Linear<T>("clinical.fc1", config_.clinical_dims[0], config_.clinical_dims[1]);
  clinical2_ = Linear<T>("clinical.fc2", config_.clinical_dims[1], config_.clinical_dims[2]);
  classifier_ = Linear<T>("classifier", config_.fused_dim(), config_.num_classes);
  for (auto* layer : {&clinical1_, &clinical2_, &classifier_}) {
    layer->weight.init_uniform(rng, layer->in_features());
    layer->bias.init_uniform(rng, layer->in_features());
  }
}

template <typename T>
FusionModel<T>::FusionModel(FusionModelConfig config, std::unique_ptr<ImageEncoder<T>> encoder,
                            std::uint64_t seed)
    : config_(std::move(config)), encoder_(std::move(encoder)) {
  config_.validate();
  if (!encoder_) throw Error(ErrorKind::kConfigError, "null encoder");
  const auto& s = encoder_->spec();
  if (s.embedding_dim != config_.encoder.embedding_dim ||
      s.input_height != config_.encoder.input_height ||
      s.input_width != config_.encoder.input_width ||
      s.input_channels != config_.encoder.input_channels) {
    throw Error(ErrorKind::kConfigError, "encoder spec does not match model config");
  }
  Rng rng(seed);
  clinical1_ = Linear<T>("clinical.fc1", config_.clinical_dims[0], config_.clinical_dims[1]);
  clinical2_ = Linear<T>("clinical.fc2", config_.clinical_dims[1], config_.clinical_dims[2]);
  classifier_ = Linear<T>("classifier", config_.fused_dim(), config_.num_classes);
  for (auto* layer : {&clinical1_, &clinical2_, &classifier_}) {
    layer->weight.init_uniform(rng, layer->in_features());
    layer->bias.init_uniform(rng, layer->in_features());
  }
}

template <typename T>
FusionModel<T>::FusionModel(const FusionModel& other)
    : config_(other.config_),
      encoder_(other.encoder_->clone()),
      clinical1_(other.clinical1_),
      clinical2_(other.clinical2_),
      classifier_(other.classifier_) {}

template <typename T>
FusionModel<T>& FusionModel<T>::operator=(const FusionModel& other) {
  if (this != &other) {
    FusionModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <typename T>
ImageTensor<T> FusionModel<T>::prepare_image(const GrayImage& image) const {
  const auto& s = config_.encoder;
  if (image.height != s.input_height || image.width != s.input_width) {
    throw Error(ErrorKind::kShapeError, "image is " + std::to_string(image.height) + "x" +
                                            std::to_string(image.width) + ", encoder expects " +
                                            std::to_string(s.input_height) + "x" +
                                            std::to_string(s.input_width));
  }
  ImageTensor<T> out(s.input_channels, image.height, image.width);
  for (int c = 0; c < s.input_channels; ++c) {
    T* dst = out.channel(c);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) dst[i] = static_cast<T>(image.pixels[i]);
  }
  return out;
}

template <typename T>
std::vector<T> FusionModel<T>::encode_image(const ImageTensor<T>& image) const {
  return encoder_->forward(image, nullptr);
}

template <typename T>
std::vector<std::vector<T>> FusionModel<T>::encode_image(std::span<const ImageTensor<T>> images) const {
  std::vector<std::vector<T>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(encode_image(img));
  return out;
}

template <typename T>
std::vector<T> FusionModel<T>::encode_clinical_branch(std::span<const T> clinical) const {
  auto h = clinical1_.forward(clinical);
  relu_inplace(std::span<T>(h));
  auto out = clinical2_.forward(h);
  relu_inplace(std::span<T>(out));
  return out;
}

template <typename T>
std::vector<std::vector<T>> FusionModel<T>::encode_clinical_branch(
    std::span<const std::vector<T>> batch) const {
  std::vector<std::vector<T>> out;
  out.reserve(batch.size());
  for (const auto& x : batch) out.push_back(encode_clinical_branch(x));
  return out;
}

template <typename T>
std::vector<T> FusionModel<T>::fuse(std::span<const T> image_emb, std::span<const T> clinical_emb) const {
  if (static_cast<int>(image_emb.size()) != config_.encoder.embedding_dim ||
      static_cast<int>(clinical_emb.size()) != config_.clinical_dims[2]) {
    throw Error(ErrorKind::kShapeError, "fuse: embedding sizes do not match config");
  }
  std::vector<T> out(image_emb.begin(), image_emb.end());
  out.insert(out.end(), clinical_emb.begin(), clinical_emb.end());
  return out;
}

template <typename T>
std::array<T, 2> FusionModel<T>::logits(std::span<const T> fused) const {
  if (static_cast<int>(fused.size()) != config_.fused_dim()) {
    throw Error(ErrorKind::kShapeError, "classifier expects " + std::to_string(config_.fused_dim()) +
                                            " features, got " + std::to_string(fused.size()));
  }
  const auto z = classifier_.forward(fused);
  return {z[0], z[1]};
}

template <typename T>
std::array<T, 2> FusionModel<T>::classify(std::span<const T> fused) const {
  const auto z = logits(fused);
  const auto p = softmax(std::span<const T>(z));
  if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
    throw Error(ErrorKind::kNonFinite, "non-finite classifier output");
  }
  return {p[0], p[1]};
}

template <typename T>
std::vector<std::array<T, 2>> FusionModel<T>::classify(std::span<const std::vector<T>> fused_batch) const {
  std::vector<std::array<T, 2>> out;
  out.reserve(fused_batch.size());
  for (const auto& f : fused_batch) out.push_back(classify(f));
  return out;
}

template <typename T>
std::vector<T> FusionModel<T>::features(const ImageTensor<T>& image, std::span<const T> clinical) const {
  switch (config_.modality) {
    case Modality::kImageOnly: return encode_image(image);
    case Modality::kClinicalOnly: return encode_clinical_branch(clinical);
    case Modality::kMultimodal: {
      const auto a = encode_image(image);
      const auto b = encode_clinical_branch(clinical);
      return fuse(a, b);
    }
  }
  return {};
}

template <typename T>
std::array<T, 2> FusionModel<T>::logits(const ImageTensor<T>& image, std::span<const T> clinical) const {
  return logits(features(image, clinical));
}

template <typename T>
T FusionModel<T>::forward(const ImageTensor<T>& image, std::span<const T> clinical) const {
  return classify(features(image, clinical))[1];
}

template <typename T>
std::vector<T> FusionModel<T>::forward(std::span<const ImageTensor<T>> images,
                                       std::span<const std::vector<T>> clinical) const {
  if (images.size() != clinical.size()) {
    throw Error(ErrorKind::kBatchMismatch, "batch sizes differ: " + std::to_string(images.size()) +
                                               " images vs " + std::to_string(clinical.size()) +
                                               " clinical vectors");
  }
  std::vector<T> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) out[i] = forward(images[i], clinical[i]);
  return out;
}

template <typename T>
T FusionModel<T>::accumulate_gradients(std::span<const ImageTensor<T>> images,
                                       std::span<const std::vector<T>> clinical,
                                       std::span<const ClassLabel> labels) {
  if (images.size() != clinical.size() || images.size() != labels.size() || images.empty()) {
    throw Error(ErrorKind::kBatchMismatch, "accumulate_gradients: inconsistent batch sizes");
  }
  const T inv_batch = T(1) / static_cast<T>(images.size());
  T total = T(0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    std::unique_ptr<typename ImageEncoder<T>::Tape> tape;
    std::vector<T> img_emb;
    if (uses_image()) img_emb = encoder_->forward(images[i], &tape);
    std::vector<T> h1;
    std::vector<T> h2;
    if (uses_clinical()) {
      h1 = clinical1_.forward(clinical[i]);
      relu_inplace(std::span<T>(h1));
      h2 = clinical2_.forward(h1);
      relu_inplace(std::span<T>(h2));
    }
    std::vector<T> fused = img_emb;
    fused.insert(fused.end(), h2.begin(), h2.end());

    const auto z = classifier_.forward(fused);
    const T m = std::max(z[0], z[1]);
    const T lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    const int y = label_index(labels[i]);
    total += lse - z[y];

    std::array<T, 2> dz;
    for (int c = 0; c < 2; ++c) dz[c] = (std::exp(z[c] - lse) - (c == y ? T(1) : T(0))) * inv_batch;
    const auto dfused = classifier_.backward(fused, dz);

    const std::size_t split = img_emb.size();
    if (uses_clinical()) {
      std::vector<T> dh2(dfused.begin() + split, dfused.end());
      relu_backward_inplace(std::span<const T>(h2), std::span<T>(dh2));
      auto dh1 = clinical2_.backward(h1, dh2);
      relu_backward_inplace(std::span<const T>(h1), std::span<T>(dh1));
      clinical1_.backward(clinical[i], dh1);
    }
    if (uses_image()) {
      encoder_->backward(*tape, std::span<const T>(dfused.data(), split));
    }
  }
  return total * inv_batch;
}

template <typename T>
T FusionModel<T>::loss(std::span<const ImageTensor<T>> images,
                       std::span<const std::vector<T>> clinical,
                       std::span<const ClassLabel> labels) const {
  if (images.size() != clinical.size() || images.size() != labels.size() || images.empty()) {
    throw Error(ErrorKind::kBatchMismatch, "loss: inconsistent batch sizes");
  }
  T total = T(0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto z = logits(images[i], clinical[i]);
    const T m = std::max(z[0], z[1]);
    const T lse = m + std::log(std::exp(z[0] - m) + std::exp(z[1] - m));
    total += lse - z[label_index(labels[i])];
  }
  return total / static_cast<T>(images.size());
}

template <typename T>
void FusionModel<T>::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename T>
std::vector<Param<T>*> FusionModel<T>::parameters() {
  auto out = encoder_->parameters();
  for (auto* layer : {&clinical1_, &clinical2_, &classifier_}) {
    out.push_back(&layer->weight);
    out.push_back(&layer->bias);
  }
  return out;
}

template <typename T>
std::vector<const Param<T>*> FusionModel<T>::parameters() const {
  auto mut = const_cast<FusionModel<T>*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

template <typename T>
Param<T>* FusionModel<T>::find_parameter(std::string_view name) {
  for (auto* p : parameters()) {
    if (p->name == name) return p;
  }
  return nullptr;
}

template class FusionModel<float>;
template class FusionModel<double>;

}  // namespace mmfuse
