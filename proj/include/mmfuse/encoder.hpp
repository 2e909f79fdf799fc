#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "mmfuse/nn.hpp"
#include "mmfuse/rng.hpp"

namespace mmfuse {

struct EncoderSpec {
  std::string name = "reference_cnn";
  int embedding_dim = 64;
  bool pretrained = false;
  int input_height = 64;
  int input_width = 64;
  // 3 for encoders built for RGB input; grayscale images are then replicated
  // across the three channels.
  int input_channels = 1;
};

// Pluggable image branch: maps a (C, H, W) image to a fixed-length embedding.
template <typename T>
class ImageEncoder {
 public:
  // Opaque forward-pass record consumed by backward().
  struct Tape {
    virtual ~Tape() = default;
  };

  virtual ~ImageEncoder() = default;

  virtual const EncoderSpec& spec() const = 0;
  virtual std::vector<T> forward(const ImageTensor<T>& image, std::unique_ptr<Tape>* tape) const = 0;
  // Accumulates parameter gradients given dL/d(embedding).
  virtual void backward(const Tape& tape, std::span<const T> grad_embedding) = 0;

  // Spatial activation maps of a named layer. Throws UnknownLayer, or
  // NonSpatialLayer for layers without spatial extent.
  virtual ImageTensor<T> layer_activations(const ImageTensor<T>& image,
                                           const std::string& layer) const = 0;
  virtual std::string default_attribution_layer() const = 0;

  virtual std::vector<Param<T>*> parameters() = 0;
  std::vector<const Param<T>*> parameters() const;

  virtual std::unique_ptr<ImageEncoder<T>> clone() const = 0;
};

// Small CPU-trainable encoder: conv blocks (3x3 conv, ReLU, 2x2 max-pool)
// with the given channel widths, global average pooling, then a linear map
// to the embedding. Layers "conv1".."convN" expose post-ReLU maps (before
// pooling); "gap" and "embedding" are non-spatial.
template <typename T>
class ReferenceCnn final : public ImageEncoder<T> {
 public:
  ReferenceCnn(EncoderSpec spec, std::vector<int> widths, Rng& rng);

  using ImageEncoder<T>::parameters;

  const EncoderSpec& spec() const override { return spec_; }
  std::vector<T> forward(const ImageTensor<T>& image,
                         std::unique_ptr<typename ImageEncoder<T>::Tape>* tape) const override;
  void backward(const typename ImageEncoder<T>::Tape& tape,
                std::span<const T> grad_embedding) override;
  ImageTensor<T> layer_activations(const ImageTensor<T>& image,
                                   const std::string& layer) const override;
  std::string default_attribution_layer() const override;
  std::vector<Param<T>*> parameters() override;
  std::unique_ptr<ImageEncoder<T>> clone() const override;

  const std::vector<int>& widths() const { return widths_; }

 private:
  EncoderSpec spec_;
  std::vector<int> widths_;
  std::vector<Conv3x3<T>> convs_;
  Linear<T> head_;
};

// Name -> factory. Built-ins: "reference_cnn" (widths 8/16/32) and
// "tiny_cnn" (widths 2/3/4, under 1k parameters at small embeddings).
template <typename T>
class EncoderRegistry {
 public:
  using Factory = std::function<std::unique_ptr<ImageEncoder<T>>(const EncoderSpec&, Rng&)>;

  static EncoderRegistry& instance();

  void add(const std::string& name, Factory factory);
  bool contains(const std::string& name) const;
  std::vector<std::string> names() const;
  // Throws ConfigError for unknown names.
  std::unique_ptr<ImageEncoder<T>> create(const EncoderSpec& spec, Rng& rng) const;

 private:
  EncoderRegistry();
  std::map<std::string, Factory> factories_;
};

}  // namespace mmfuse
