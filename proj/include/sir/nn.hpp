// Copyright 2026 The sir-engine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

// Minimal dense conv-net kernels over HWC tensors, with hand-written
// reverse-mode gradients.
namespace sir::nn {

template <class T>
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<T> values;

  Tensor3() = default;
  Tensor3(int h, int w, int c)
      : height(h), width(w), channels(c), values(static_cast<std::size_t>(h) * w * c, T(0)) {}

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  T& at(int y, int x, int c) { return values[index(y, x, c)]; }
  T at(int y, int x, int c) const { return values[index(y, x, c)]; }
  T* cell(int y, int x) { return values.data() + index(y, x, 0); }
  const T* cell(int y, int x) const { return values.data() + index(y, x, 0); }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Tensor3& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

template <class T>
Tensor3<T> from_feature_map(const FeatureMap& fm) {
  Tensor3<T> t(fm.height(), fm.width(), fm.channels());
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = static_cast<T>(fm.data()[i]);
  return t;
}

template <class T>
FeatureMap to_feature_map(const Tensor3<T>& t, float stride) {
  std::vector<float> data(t.values.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(t.values[i]);
  return FeatureMap(t.width, t.height, t.channels, stride, std::move(data));
}

// Square convolution with zero padding k/2. Weights are laid out
// [ky][kx][in][out] so the innermost loop runs over output channels.
template <class T>
struct Conv2d {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 1;
  int stride = 1;
  bool has_bias = true;
  std::vector<T> weight;
  std::vector<T> bias;

  Conv2d() = default;
  Conv2d(int in, int out, int k, int s, bool with_bias)
      : in_channels(in), out_channels(out), kernel(k), stride(s), has_bias(with_bias),
        weight(static_cast<std::size_t>(k) * k * in * out, T(0)),
        bias(with_bias ? static_cast<std::size_t>(out) : 0, T(0)) {
    require(in >= 1 && out >= 1 && k >= 1 && s >= 1, "conv: invalid geometry");
  }

  int pad() const { return kernel / 2; }
  int out_extent(int n) const { return (n + 2 * pad() - kernel) / stride + 1; }
  std::size_t weight_index(int ky, int kx, int ic, int oc) const {
    return ((static_cast<std::size_t>(ky) * kernel + kx) * in_channels + ic) * out_channels + oc;
  }
  // Multiply-adds for one forward pass over an input of the given size.
  std::size_t multiply_adds(int h, int w) const {
    return static_cast<std::size_t>(out_extent(h)) * out_extent(w) * kernel * kernel * in_channels *
           out_channels;
  }
};

template <class T>
Tensor3<T> conv_forward(const Conv2d<T>& conv, const Tensor3<T>& x) {
  require(x.channels == conv.in_channels, "conv: input channel mismatch");
  const int oh = conv.out_extent(x.height);
  const int ow = conv.out_extent(x.width);
  require(oh >= 1 && ow >= 1, "conv: input too small");
  Tensor3<T> y(oh, ow, conv.out_channels);
  const int pad = conv.pad();
  const int oc_n = conv.out_channels;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* out = y.cell(oy, ox);
      if (conv.has_bias) std::copy(conv.bias.begin(), conv.bias.end(), out);
      for (int ky = 0; ky < conv.kernel; ++ky) {
        const int iy = oy * conv.stride + ky - pad;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < conv.kernel; ++kx) {
          const int ix = ox * conv.stride + kx - pad;
          if (ix < 0 || ix >= x.width) continue;
          const T* in = x.cell(iy, ix);
          const T* w = conv.weight.data() + conv.weight_index(ky, kx, 0, 0);
          for (int ic = 0; ic < conv.in_channels; ++ic, w += oc_n) {
            const T v = in[ic];
            if (v == T(0)) continue;
            for (int oc = 0; oc < oc_n; ++oc) out[oc] += v * w[oc];
          }
        }
      }
    }
  }
  return y;
}

// Accumulates dL/dW and dL/db into `grad` (same geometry as `conv`) and, when
// `dx` is non-null, writes dL/dx.
template <class T>
void conv_backward(const Conv2d<T>& conv, const Tensor3<T>& x, const Tensor3<T>& dy,
                   Conv2d<T>& grad, Tensor3<T>* dx) {
  require(dy.channels == conv.out_channels, "conv backward: gradient channel mismatch");
  const int pad = conv.pad();
  const int oc_n = conv.out_channels;
  if (dx != nullptr) *dx = Tensor3<T>(x.height, x.width, x.channels);
  for (int oy = 0; oy < dy.height; ++oy) {
    for (int ox = 0; ox < dy.width; ++ox) {
      const T* g = dy.cell(oy, ox);
      if (conv.has_bias) {
        for (int oc = 0; oc < oc_n; ++oc) grad.bias[oc] += g[oc];
      }
      for (int ky = 0; ky < conv.kernel; ++ky) {
        const int iy = oy * conv.stride + ky - pad;
        if (iy < 0 || iy >= x.height) continue;
        for (int kx = 0; kx < conv.kernel; ++kx) {
          const int ix = ox * conv.stride + kx - pad;
          if (ix < 0 || ix >= x.width) continue;
          const T* in = x.cell(iy, ix);
          const std::size_t base = conv.weight_index(ky, kx, 0, 0);
          T* gw = grad.weight.data() + base;
          const T* w = conv.weight.data() + base;
          T* gin = dx != nullptr ? dx->cell(iy, ix) : nullptr;
          for (int ic = 0; ic < conv.in_channels; ++ic, gw += oc_n, w += oc_n) {
            const T v = in[ic];
            if (v != T(0)) {
              for (int oc = 0; oc < oc_n; ++oc) gw[oc] += v * g[oc];
            }
            if (gin != nullptr) {
              T s = T(0);
              for (int oc = 0; oc < oc_n; ++oc) s += w[oc] * g[oc];
              gin[ic] += s;
            }
          }
        }
      }
    }
  }
}

template <class T>
void relu_inplace(Tensor3<T>& t) {
  for (auto& v : t.values) v = v > T(0) ? v : T(0);
}

// Masks `dy` by the activation pattern of a rectified output.
template <class T>
void relu_backward_inplace(const Tensor3<T>& activated, Tensor3<T>& dy) {
  for (std::size_t i = 0; i < dy.values.size(); ++i) {
    if (!(activated.values[i] > T(0))) dy.values[i] = T(0);
  }
}

template <class T>
void add_inplace(Tensor3<T>& a, const Tensor3<T>& b) {
  require(a.same_shape(b), "add: shape mismatch");
  for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] += b.values[i];
}

// Average pooling with window == stride == factor. Edge windows average over
// the cells that exist, so the output extent is ceil(n / factor).
template <class T>
Tensor3<T> avg_pool(const Tensor3<T>& x, int factor) {
  require(factor >= 1, "avg_pool: factor must be >= 1");
  const int oh = (x.height + factor - 1) / factor;
  const int ow = (x.width + factor - 1) / factor;
  Tensor3<T> y(oh, ow, x.channels);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      T* out = y.cell(oy, ox);
      const int y_end = std::min(x.height, (oy + 1) * factor);
      const int x_end = std::min(x.width, (ox + 1) * factor);
      int n = 0;
      for (int iy = oy * factor; iy < y_end; ++iy) {
        for (int ix = ox * factor; ix < x_end; ++ix, ++n) {
          const T* in = x.cell(iy, ix);
          for (int c = 0; c < x.channels; ++c) out[c] += in[c];
        }
      }
      const T inv = T(1) / static_cast<T>(n);
      for (int c = 0; c < x.channels; ++c) out[c] *= inv;
    }
  }
  return y;
}

}  // namespace sir::nn
