#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mmfuse/core_data.hpp"
#include "mmfuse/encoder.hpp"
#include "mmfuse/image.hpp"
#include "mmfuse/nn.hpp"

namespace mmfuse {

// Which embeddings reach the classifier.
enum class Modality { kMultimodal, kImageOnly, kClinicalOnly };

std::string_view modality_name(Modality m);  // "MULTIMODAL", "IMAGE_ONLY", "CLINICAL_ONLY"
Modality parse_modality(std::string_view text);

inline constexpr int kClinicalHidden = 16;
inline constexpr int kClinicalEmbedding = 8;

struct FusionModelConfig {
  EncoderSpec encoder;
  // Clinical MLP widths; the first entry tracks the schema's total_dim.
  std::array<int, 3> clinical_dims{10, kClinicalHidden, kClinicalEmbedding};
  int num_classes = kNumClasses;
  Modality modality = Modality::kMultimodal;

  // Classifier input width for this modality (embedding_dim + 8 when fused).
  int fused_dim() const;
  void validate() const;
};

// Dual-branch classifier: image encoder and a clinical MLP
// (in -> 16 -> 8, ReLU after both layers), concatenated [image | clinical]
// and mapped by one linear layer to two softmax outputs.
template <typename T>
class FusionModel {
 public:
  // Builds the encoder from the registry; all weights drawn from `seed`.
  FusionModel(FusionModelConfig config, std::uint64_t seed);
  // Uses a caller-supplied encoder (its spec must match config.encoder sizes).
  FusionModel(FusionModelConfig config, std::unique_ptr<ImageEncoder<T>> encoder,
              std::uint64_t seed);

  FusionModel(const FusionModel& other);
  FusionModel& operator=(const FusionModel& other);
  FusionModel(FusionModel&&) noexcept = default;
  FusionModel& operator=(FusionModel&&) noexcept = default;

  const FusionModelConfig& config() const { return config_; }
  ImageEncoder<T>& encoder() { return *encoder_; }
  const ImageEncoder<T>& encoder() const { return *encoder_; }

  // Converts a [0,1] grayscale image of the encoder's input size to the
  // encoder's channel layout (replicated when it expects RGB).
  ImageTensor<T> prepare_image(const GrayImage& image) const;

  std::vector<T> encode_image(const ImageTensor<T>& image) const;
  std::vector<std::vector<T>> encode_image(std::span<const ImageTensor<T>> images) const;

  std::vector<T> encode_clinical_branch(std::span<const T> clinical) const;
  std::vector<std::vector<T>> encode_clinical_branch(std::span<const std::vector<T>> batch) const;

  // Concatenation [image_emb | clinical_emb]; sizes checked against config.
  std::vector<T> fuse(std::span<const T> image_emb, std::span<const T> clinical_emb) const;

  std::array<T, 2> logits(std::span<const T> fused) const;
  std::array<T, 2> classify(std::span<const T> fused) const;
  std::vector<std::array<T, 2>> classify(std::span<const std::vector<T>> fused_batch) const;

  // Classifier input for one sample according to the modality.
  std::vector<T> features(const ImageTensor<T>& image, std::span<const T> clinical) const;
  std::array<T, 2> logits(const ImageTensor<T>& image, std::span<const T> clinical) const;
  // Positive-class probability.
  T forward(const ImageTensor<T>& image, std::span<const T> clinical) const;
  std::vector<T> forward(std::span<const ImageTensor<T>> images,
                         std::span<const std::vector<T>> clinical) const;

  // Mean cross-entropy over the batch. Gradients are accumulated into the
  // parameters (call zero_grad() first).
  T accumulate_gradients(std::span<const ImageTensor<T>> images,
                         std::span<const std::vector<T>> clinical,
                         std::span<const ClassLabel> labels);
  // Loss only, no gradient bookkeeping.
  T loss(std::span<const ImageTensor<T>> images, std::span<const std::vector<T>> clinical,
         std::span<const ClassLabel> labels) const;

  void zero_grad();
  std::vector<Param<T>*> parameters();
  std::vector<const Param<T>*> parameters() const;
  Param<T>* find_parameter(std::string_view name);

  Linear<T>& clinical_layer(int i) { return i == 0 ? clinical1_ : clinical2_; }
  Linear<T>& classifier() { return classifier_; }
  const Linear<T>& classifier() const { return classifier_; }

 private:
  bool uses_image() const { return config_.modality != Modality::kClinicalOnly; }
  bool uses_clinical() const { return config_.modality != Modality::kImageOnly; }
  int image_dim() const { return config_.encoder.embedding_dim; }

  FusionModelConfig config_;
  std::unique_ptr<ImageEncoder<T>> encoder_;
  Linear<T> clinical1_;
  Linear<T> clinical2_;
  Linear<T> classifier_;
};

}  // namespace mmfuse
