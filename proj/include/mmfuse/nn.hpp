#pragma once

#include <span>
#include <string>
#include <vector>

#include "mmfuse/rng.hpp"

namespace mmfuse {

// A trainable tensor with its gradient accumulator. Row-major; affine weights
// are stored (out, in).
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string n, std::vector<int> s);

  std::size_t size() const { return value.size(); }
  void zero_grad();
  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  // Uniform in +-gain / sqrt(fan_in).
  void init_uniform(Rng& rng, int fan_in, double gain = 1.0);
};

// Channel-major (C, H, W) activation block.
template <typename T>
struct ImageTensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  ImageTensor() = default;
  ImageTensor(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T* channel(int c) { return data.data() + c * plane(); }
  const T* channel(int c) const { return data.data() + c * plane(); }
  T& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  T at(int c, int y, int x) const { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
};

// 3x3 convolution, stride 1, zero padding 1. Weight shape (out, in, 3, 3).
template <typename T>
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(std::string name, int in_channels, int out_channels);

  int in_channels() const { return in_; }
  int out_channels() const { return out_; }

  // `padded` receives the zero-padded input, needed by backward().
  ImageTensor<T> forward(const ImageTensor<T>& input, ImageTensor<T>* padded) const;
  // Accumulates weight/bias gradients; writes the input gradient when
  // `grad_input` is non-null.
  void backward(const ImageTensor<T>& padded, const ImageTensor<T>& grad_output,
                ImageTensor<T>* grad_input);

  Param<T> weight;
  Param<T> bias;

 private:
  int in_ = 0;
  int out_ = 0;
};

// y = W x + b, W shape (out, in).
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(std::string name, int in_features, int out_features);

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  std::vector<T> forward(std::span<const T> x) const;
  // Accumulates gradients and returns dL/dx.
  std::vector<T> backward(std::span<const T> x, std::span<const T> grad_output);

  Param<T> weight;
  Param<T> bias;

 private:
  int in_ = 0;
  int out_ = 0;
};

template <typename T>
void relu_inplace(std::span<T> v);

// Zeroes grad where the forward activation (post-ReLU) was not positive.
template <typename T>
void relu_backward_inplace(std::span<const T> activation, std::span<T> grad);

// 2x2 max pool, stride 2 (odd trailing row/column dropped). `argmax` receives
// the flat input index of each output's winner.
template <typename T>
ImageTensor<T> max_pool2(const ImageTensor<T>& input, std::vector<std::size_t>* argmax);

template <typename T>
ImageTensor<T> max_pool2_backward(const ImageTensor<T>& input_shape, const ImageTensor<T>& grad_output,
                                  const std::vector<std::size_t>& argmax);

// Numerically stable softmax (max subtracted).
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

}  // namespace mmfuse
