#include "mmfuse/encoder.hpp"

#include "mmfuse/errors.hpp"

namespace mmfuse {

template <typename T>
std::vector<const Param<T>*> ImageEncoder<T>::parameters() const {
  auto mut = const_cast<ImageEncoder<T>*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

namespace {

template <typename T>
struct CnnTape final : ImageEncoder<T>::Tape {
  struct Block {
    ImageTensor<T> padded;      // conv input, zero padded
    ImageTensor<T> activation;  // post-ReLU conv output
    std::vector<std::size_t> argmax;
  };
  std::vector<Block> blocks;
  std::vector<T> pooled;  // global average pool output
  int last_height = 0;
  int last_width = 0;
};

}  // namespace

template <typename T>
ReferenceCnn<T>::ReferenceCnn(EncoderSpec spec, std::vector<int> widths, Rng& rng)
    : spec_(std::move(spec)), widths_(std::move(widths)) {
  if (widths_.empty()) throw Error(ErrorKind::kConfigError, "ReferenceCnn needs at least one block");
  if (spec_.embedding_dim < 1) throw Error(ErrorKind::kConfigError, "embedding_dim must be >= 1");
  if (spec_.input_channels != 1 && spec_.input_channels != 3) {
    throw Error(ErrorKind::kConfigError, "input_channels must be 1 or 3");
  }
  const int min_side = 1 << widths_.size();
  if (spec_.input_height < min_side || spec_.input_width < min_side) {
    throw Error(ErrorKind::kConfigError, "input_size too small for " +
                                             std::to_string(widths_.size()) + " pooling stages");
  }
  int in = spec_.input_channels;
  for (std::size_t i = 0; i < widths_.size(); ++i) {
    Conv3x3<T> conv("encoder.conv" + std::to_string(i + 1), in, widths_[i]);
    conv.weight.init_uniform(rng, in * 9, std::sqrt(6.0));
    convs_.push_back(std::move(conv));
    in = widths_[i];
  }
  head_ = Linear<T>("encoder.head", in, spec_.embedding_dim);
  head_.weight.init_uniform(rng, in);
  head_.bias.init_uniform(rng, in);
}

// Fixed input standardization, (x - 0.5) / 0.25, applied before the first conv.
template <typename T>
ImageTensor<T> standardize(const ImageTensor<T>& image) {
  ImageTensor<T> x = image;
  for (auto& v : x.data) v = (v - T(0.5)) * T(4);
  return x;
}

template <typename T>
std::vector<T> ReferenceCnn<T>::forward(const ImageTensor<T>& image,
                                        std::unique_ptr<typename ImageEncoder<T>::Tape>* tape) const {
  if (image.channels != spec_.input_channels || image.height != spec_.input_height ||
      image.width != spec_.input_width) {
    throw Error(ErrorKind::kShapeError,
                "encoder expects " + std::to_string(spec_.input_channels) + "x" +
                    std::to_string(spec_.input_height) + "x" + std::to_string(spec_.input_width) +
                    " input, got " + std::to_string(image.channels) + "x" +
                    std::to_string(image.height) + "x" + std::to_string(image.width));
  }
  auto rec = tape ? std::make_unique<CnnTape<T>>() : nullptr;
  ImageTensor<T> x = standardize(image);
  for (const auto& conv : convs_) {
    typename CnnTape<T>::Block block;
    ImageTensor<T> a = conv.forward(x, rec ? &block.padded : nullptr);
    relu_inplace(std::span<T>(a.data));
    x = max_pool2(a, rec ? &block.argmax : nullptr);
    if (rec) {
      block.activation = std::move(a);
      rec->blocks.push_back(std::move(block));
    }
  }
  std::vector<T> pooled(x.channels);
  const T inv = T(1) / static_cast<T>(x.plane());
  for (int c = 0; c < x.channels; ++c) {
    T s = T(0);
    const T* ch = x.channel(c);
    for (std::size_t i = 0; i < x.plane(); ++i) s += ch[i];
    pooled[c] = s * inv;
  }
  auto emb = head_.forward(pooled);
  if (rec) {
    rec->pooled = std::move(pooled);
    rec->last_height = x.height;
    rec->last_width = x.width;
    *tape = std::move(rec);
  }
  return emb;
}

template <typename T>
void ReferenceCnn<T>::backward(const typename ImageEncoder<T>::Tape& tape,
                               std::span<const T> grad_embedding) {
  const auto& rec = dynamic_cast<const CnnTape<T>&>(tape);
  const auto g_pooled = head_.backward(rec.pooled, grad_embedding);
  const int c_last = convs_.back().out_channels();
  ImageTensor<T> g(c_last, rec.last_height, rec.last_width);
  const T inv = T(1) / static_cast<T>(g.plane());
  for (int c = 0; c < c_last; ++c) {
    std::fill_n(g.channel(c), g.plane(), g_pooled[c] * inv);
  }
  for (std::size_t i = convs_.size(); i-- > 0;) {
    const auto& block = rec.blocks[i];
    ImageTensor<T> g_act = max_pool2_backward(block.activation, g, block.argmax);
    relu_backward_inplace(std::span<const T>(block.activation.data), std::span<T>(g_act.data));
    if (i == 0) {
      convs_[i].backward(block.padded, g_act, nullptr);
    } else {
      convs_[i].backward(block.padded, g_act, &g);
    }
  }
}

template <typename T>
ImageTensor<T> ReferenceCnn<T>::layer_activations(const ImageTensor<T>& image,
                                                  const std::string& layer) const {
  if (layer == "gap" || layer == "embedding") {
    throw Error(ErrorKind::kNonSpatialLayer, "layer '" + layer + "' has no spatial extent");
  }
  std::size_t target = convs_.size();
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    if (layer == "conv" + std::to_string(i + 1)) target = i;
  }
  if (target == convs_.size()) throw Error(ErrorKind::kUnknownLayer, "unknown layer '" + layer + "'");
  ImageTensor<T> x = standardize(image);
  for (std::size_t i = 0;; ++i) {
    ImageTensor<T> a = convs_[i].forward(x, nullptr);
    relu_inplace(std::span<T>(a.data));
    if (i == target) return a;
    x = max_pool2(a, nullptr);
  }
}

template <typename T>
std::string ReferenceCnn<T>::default_attribution_layer() const {
  return "conv" + std::to_string(convs_.size());
}

template <typename T>
std::vector<Param<T>*> ReferenceCnn<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& c : convs_) {
    out.push_back(&c.weight);
    out.push_back(&c.bias);
  }
  out.push_back(&head_.weight);
  out.push_back(&head_.bias);
  return out;
}

template <typename T>
std::unique_ptr<ImageEncoder<T>> ReferenceCnn<T>::clone() const {
  return std::make_unique<ReferenceCnn<T>>(*this);
}

template <typename T>
EncoderRegistry<T>& EncoderRegistry<T>::instance() {
  static EncoderRegistry registry;
  return registry;
}

template <typename T>
EncoderRegistry<T>::EncoderRegistry() {
  auto cnn = [](std::vector<int> widths) {
    return [widths](const EncoderSpec& spec, Rng& rng) -> std::unique_ptr<ImageEncoder<T>> {
      if (spec.pretrained) {
        throw Error(ErrorKind::kConfigError,
                    "encoder '" + spec.name + "' has no pretrained weights; set pretrained=false");
      }
      return std::make_unique<ReferenceCnn<T>>(spec, widths, rng);
    };
  };
  factories_["reference_cnn"] = cnn({8, 16, 32});
  factories_["tiny_cnn"] = cnn({2, 3, 4});
}

template <typename T>
void EncoderRegistry<T>::add(const std::string& name, Factory factory) {
  factories_[name] = std::move(factory);
}

template <typename T>
bool EncoderRegistry<T>::contains(const std::string& name) const {
  return factories_.count(name) > 0;
}

template <typename T>
std::vector<std::string> EncoderRegistry<T>::names() const {
  std::vector<std::string> out;
  for (const auto& [n, f] : factories_) out.push_back(n);
  return out;
}

template <typename T>
std::unique_ptr<ImageEncoder<T>> EncoderRegistry<T>::create(const EncoderSpec& spec, Rng& rng) const {
  auto it = factories_.find(spec.name);
  if (it == factories_.end()) {
    throw Error(ErrorKind::kConfigError, "unknown encoder '" + spec.name + "'");
  }
  return it->second(spec, rng);
}

template class ImageEncoder<float>;
template class ImageEncoder<double>;
template class ReferenceCnn<float>;
template class ReferenceCnn<double>;
template class EncoderRegistry<float>;
template class EncoderRegistry<double>;

}  // namespace mmfuse
