#include "mmfuse/nn.hpp"

#include <algorithm>
#include <cmath>

#include "mmfuse/errors.hpp"

namespace mmfuse {

template <typename T>
Param<T>::Param(std::string n, std::vector<int> s) : name(std::move(n)), shape(std::move(s)) {
  std::size_t count = 1;
  for (int d : shape) count *= static_cast<std::size_t>(d);
  value.assign(count, T(0));
  grad.assign(count, T(0));
}

template <typename T>
void Param<T>::zero_grad() {
  std::fill(grad.begin(), grad.end(), T(0));
}

template <typename T>
void Param<T>::init_uniform(Rng& rng, int fan_in, double gain) {
  const double bound = gain / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : value) v = static_cast<T>(rng.uniform(-bound, bound));
}

template <typename T>
Conv3x3<T>::Conv3x3(std::string name, int in_channels, int out_channels)
    : weight(name + ".weight", {out_channels, in_channels, 3, 3}),
      bias(name + ".bias", {out_channels}),
      in_(in_channels),
      out_(out_channels) {}

template <typename T>
ImageTensor<T> Conv3x3<T>::forward(const ImageTensor<T>& input, ImageTensor<T>* padded) const {
  if (input.channels != in_) {
    throw Error(ErrorKind::kShapeError, "conv expects " + std::to_string(in_) + " channels, got " +
                                            std::to_string(input.channels));
  }
  const int h = input.height;
  const int w = input.width;
  const int pw = w + 2;
  ImageTensor<T> pad(in_, h + 2, pw);
  for (int c = 0; c < in_; ++c) {
    for (int y = 0; y < h; ++y) {
      std::copy_n(input.channel(c) + static_cast<std::size_t>(y) * w, w,
                  pad.channel(c) + static_cast<std::size_t>(y + 1) * pw + 1);
    }
  }
  ImageTensor<T> out(out_, h, w);
  for (int oc = 0; oc < out_; ++oc) {
    T* __restrict o = out.channel(oc);
    std::fill_n(o, out.plane(), bias.value[oc]);
    for (int ic = 0; ic < in_; ++ic) {
      const T* k = weight.value.data() + (static_cast<std::size_t>(oc) * in_ + ic) * 9;
      const T k0 = k[0], k1 = k[1], k2 = k[2], k3 = k[3], k4 = k[4], k5 = k[5], k6 = k[6],
              k7 = k[7], k8 = k[8];
      const T* p = pad.channel(ic);
      for (int y = 0; y < h; ++y) {
        T* __restrict orow = o + static_cast<std::size_t>(y) * w;
        const T* __restrict r0 = p + static_cast<std::size_t>(y) * pw;
        const T* __restrict r1 = r0 + pw;
        const T* __restrict r2 = r1 + pw;
        for (int x = 0; x < w; ++x) {
          orow[x] += k0 * r0[x] + k1 * r0[x + 1] + k2 * r0[x + 2] + k3 * r1[x] + k4 * r1[x + 1] +
                     k5 * r1[x + 2] + k6 * r2[x] + k7 * r2[x + 1] + k8 * r2[x + 2];
        }
      }
    }
  }
  if (padded) *padded = std::move(pad);
  return out;
}

template <typename T>
void Conv3x3<T>::backward(const ImageTensor<T>& padded, const ImageTensor<T>& grad_output,
                          ImageTensor<T>* grad_input) {
  const int h = grad_output.height;
  const int w = grad_output.width;
  const int pw = w + 2;
  ImageTensor<T> grad_pad;
  if (grad_input) grad_pad = ImageTensor<T>(in_, h + 2, pw);
  std::vector<T> acc(static_cast<std::size_t>(9) * w);

  for (int oc = 0; oc < out_; ++oc) {
    const T* g = grad_output.channel(oc);
    T bsum = T(0);
    for (std::size_t i = 0; i < grad_output.plane(); ++i) bsum += g[i];
    bias.grad[oc] += bsum;

    for (int ic = 0; ic < in_; ++ic) {
      const T* p = padded.channel(ic);
      T* kgrad = weight.grad.data() + (static_cast<std::size_t>(oc) * in_ + ic) * 9;
      const T* k = weight.value.data() + (static_cast<std::size_t>(oc) * in_ + ic) * 9;
      std::fill(acc.begin(), acc.end(), T(0));
      for (int y = 0; y < h; ++y) {
        const T* __restrict grow = g + static_cast<std::size_t>(y) * w;
        for (int ky = 0; ky < 3; ++ky) {
          const T* __restrict r = p + static_cast<std::size_t>(y + ky) * pw;
          for (int kx = 0; kx < 3; ++kx) {
            T* __restrict a = acc.data() + static_cast<std::size_t>(ky * 3 + kx) * w;
            const T* __restrict rs = r + kx;
            for (int x = 0; x < w; ++x) a[x] += grow[x] * rs[x];
          }
        }
        if (grad_input) {
          T* dp = grad_pad.channel(ic);
          for (int ky = 0; ky < 3; ++ky) {
            T* __restrict dr = dp + static_cast<std::size_t>(y + ky) * pw;
            const T k0 = k[ky * 3], k1 = k[ky * 3 + 1], k2 = k[ky * 3 + 2];
            for (int x = 0; x < w; ++x) dr[x] += k0 * grow[x];
            for (int x = 0; x < w; ++x) dr[x + 1] += k1 * grow[x];
            for (int x = 0; x < w; ++x) dr[x + 2] += k2 * grow[x];
          }
        }
      }
      for (int t = 0; t < 9; ++t) {
        const T* a = acc.data() + static_cast<std::size_t>(t) * w;
        T s = T(0);
        for (int x = 0; x < w; ++x) s += a[x];
        kgrad[t] += s;
      }
    }
  }
  if (grad_input) {
    *grad_input = ImageTensor<T>(in_, h, w);
    for (int c = 0; c < in_; ++c) {
      for (int y = 0; y < h; ++y) {
        std::copy_n(grad_pad.channel(c) + static_cast<std::size_t>(y + 1) * pw + 1, w,
                    grad_input->channel(c) + static_cast<std::size_t>(y) * w);
      }
    }
  }
}

template <typename T>
Linear<T>::Linear(std::string name, int in_features, int out_features)
    : weight(name + ".weight", {out_features, in_features}),
      bias(name + ".bias", {out_features}),
      in_(in_features),
      out_(out_features) {}

template <typename T>
std::vector<T> Linear<T>::forward(std::span<const T> x) const {
  if (static_cast<int>(x.size()) != in_) {
    throw Error(ErrorKind::kShapeError, weight.name + ": expected input of length " +
                                            std::to_string(in_) + ", got " +
                                            std::to_string(x.size()));
  }
  std::vector<T> y(bias.value.begin(), bias.value.end());
  for (int o = 0; o < out_; ++o) {
    const T* row = weight.value.data() + static_cast<std::size_t>(o) * in_;
    T s = T(0);
    for (int i = 0; i < in_; ++i) s += row[i] * x[i];
    y[o] += s;
  }
  return y;
}

template <typename T>
std::vector<T> Linear<T>::backward(std::span<const T> x, std::span<const T> grad_output) {
  std::vector<T> gx(in_, T(0));
  for (int o = 0; o < out_; ++o) {
    const T go = grad_output[o];
    bias.grad[o] += go;
    T* grow = weight.grad.data() + static_cast<std::size_t>(o) * in_;
    const T* row = weight.value.data() + static_cast<std::size_t>(o) * in_;
    for (int i = 0; i < in_; ++i) {
      grow[i] += go * x[i];
      gx[i] += go * row[i];
    }
  }
  return gx;
}

template <typename T>
void relu_inplace(std::span<T> v) {
  for (auto& x : v) {
    if (x < T(0)) x = T(0);  // NaN passes through
  }
}

template <typename T>
void relu_backward_inplace(std::span<const T> activation, std::span<T> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(activation[i] > T(0))) grad[i] = T(0);
  }
}

template <typename T>
ImageTensor<T> max_pool2(const ImageTensor<T>& input, std::vector<std::size_t>* argmax) {
  const int oh = input.height / 2;
  const int ow = input.width / 2;
  if (oh < 1 || ow < 1) throw Error(ErrorKind::kShapeError, "max_pool2: input smaller than 2x2");
  ImageTensor<T> out(input.channels, oh, ow);
  if (argmax) argmax->resize(out.data.size());
  std::size_t o = 0;
  for (int c = 0; c < input.channels; ++c) {
    const std::size_t base = c * input.plane();
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x, ++o) {
        std::size_t best = base + static_cast<std::size_t>(2 * y) * input.width + 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const std::size_t idx =
                base + static_cast<std::size_t>(2 * y + dy) * input.width + 2 * x + dx;
            if (input.data[idx] > input.data[best]) best = idx;
          }
        }
        out.data[o] = input.data[best];
        if (argmax) (*argmax)[o] = best;
      }
    }
  }
  return out;
}

template <typename T>
ImageTensor<T> max_pool2_backward(const ImageTensor<T>& input_shape, const ImageTensor<T>& grad_output,
                                  const std::vector<std::size_t>& argmax) {
  ImageTensor<T> g(input_shape.channels, input_shape.height, input_shape.width);
  for (std::size_t o = 0; o < grad_output.data.size(); ++o) g.data[argmax[o]] += grad_output.data[o];
  return g;
}

template <typename T>
std::vector<T> softmax(std::span<const T> logits) {
  const T m = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T sum = T(0);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

#define MMFUSE_INSTANTIATE_NN(T)                                                              \
  template struct Param<T>;                                                                   \
  template class Conv3x3<T>;                                                                  \
  template class Linear<T>;                                                                   \
  template void relu_inplace<T>(std::span<T>);                                                \
  template void relu_backward_inplace<T>(std::span<const T>, std::span<T>);                   \
  template ImageTensor<T> max_pool2<T>(const ImageTensor<T>&, std::vector<std::size_t>*);     \
  template ImageTensor<T> max_pool2_backward<T>(const ImageTensor<T>&, const ImageTensor<T>&, \
                                                const std::vector<std::size_t>&);             \
  template std::vector<T> softmax<T>(std::span<const T>);

MMFUSE_INSTANTIATE_NN(float)
MMFUSE_INSTANTIATE_NN(double)

#undef MMFUSE_INSTANTIATE_NN

}  // namespace mmfuse
