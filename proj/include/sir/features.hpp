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

#include <array>
#include <cmath>
#include <algorithm>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sir/error.hpp"
#include "sir/nn.hpp"
#include "sir/raster.hpp"
#include "sir/rng.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Seed of the fixed filter-bank mixing weights. Changing it changes every
// feature map, so it is part of the on-disk contract.
inline constexpr std::uint64_t kFilterBankSeed = 0x5151'2024'0f0eULL;

inline constexpr int kF2Stride = 4, kF3Stride = 8, kF4Stride = 16, kTeacherStride = 16;
inline constexpr int kF2Channels = 16, kF3Channels = 32, kF4Channels = 64, kTeacherChannels = 64;

// Detector-pyramid stand-ins plus the teacher map.
struct MultiScaleFeatures {
  FeatureMap f2;
  FeatureMap f3;
  FeatureMap f4;
  FeatureMap teacher;
};

namespace detail {

inline nn::Conv2d<float> fixed_conv(std::uint64_t stream, int in, int out, int k, double gain) {
  nn::Conv2d<float> conv(in, out, k, 1, false);
  Rng rng(mix_seed(kFilterBankSeed, stream));
  const double std_dev = gain * std::sqrt(2.0 / (static_cast<double>(in) * k * k));
  for (auto& w : conv.weight) w = static_cast<float>(rng.normal() * std_dev);
  return conv;
}

// All mixing stages are 1x1: wider kernels pull neighbouring objects and
// background into an object's cells.
struct FilterBank {
  nn::Conv2d<float> to_f3 = fixed_conv(3, kF2Channels, kF3Channels, 1, 1.0);
  nn::Conv2d<float> to_f4 = fixed_conv(4, kF3Channels, kF4Channels, 1, 1.0);
  nn::Conv2d<float> teacher_f4 = fixed_conv(5, kF4Channels, kTeacherChannels, 1, 0.8);
  nn::Conv2d<float> teacher_f3 = fixed_conv(6, kF3Channels, kTeacherChannels, 1, 0.8);
  nn::Conv2d<float> teacher_f2 = fixed_conv(7, kF2Channels, kTeacherChannels, 1, 0.2);

  static const FilterBank& instance() {
    static const FilterBank bank;
    return bank;
  }
};

inline constexpr double kF2Gain = 4.0;
// Sharpness of the hue tuning curves.
inline constexpr double kHueTuning = 8.0;

// Separable [1 2 1]/4 blur, replicate border. Applied before every pooling
// step to damp stride aliasing.
inline nn::Tensor3<float> binomial_blur(const nn::Tensor3<float>& x) {
  const int h = x.height, w = x.width, c = x.channels;
  auto at = [&](const nn::Tensor3<float>& t, int y, int xx) {
    return t.values.data() + (static_cast<std::size_t>(y) * w + xx) * c;
  };
  nn::Tensor3<float> tmp(h, w, c), out(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const float *l = at(x, y, std::max(0, xx - 1)), *m = at(x, y, xx), *r = at(x, y, std::min(w - 1, xx + 1));
      float* o = tmp.values.data() + (static_cast<std::size_t>(y) * w + xx) * c;
      for (int k = 0; k < c; ++k) o[k] = 0.25f * l[k] + 0.5f * m[k] + 0.25f * r[k];
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const float *u = at(tmp, std::max(0, y - 1), xx), *m = at(tmp, y, xx), *d = at(tmp, std::min(h - 1, y + 1), xx);
      float* o = out.values.data() + (static_cast<std::size_t>(y) * w + xx) * c;
      for (int k = 0; k < c; ++k) o[k] = 0.25f * u[k] + 0.5f * m[k] + 0.25f * d[k];
    }
  }
  return out;
}

inline nn::Tensor3<float> blur_pool(const nn::Tensor3<float>& x, int factor) {
  return nn::avg_pool(binomial_blur(x), factor);
}

}  // namespace detail

// Fixed, training-free feature extractor.
//
//   f2:      16 hue-tuned chroma units. With opponent planes rg, by, chroma
//            c = |(rg, by)| and hue t, unit k responds c * cos(t - 2 pi k/16)^8
//            where the cosine is positive. Blurred, 4x4 average pooled.
//            Achromatic pixels give exactly 0 and the map is homogeneous in
//            chroma, so gray background never shows up in an embedding.
//   f3, f4:  1x1 seeded random conv + rectification + blur + 2x2 pool.
//   teacher: rectified sum of 1x1 convs of f4, f3 pooled by 2 and f2 pooled
//            by 4.
//
// Every stage is pointwise or aligned pooling, so shifting the image by a
// multiple of 16 px shifts every map by whole cells away from the border.
inline MultiScaleFeatures filter_bank_features(const Raster& image) {
  require(image.width >= 64 && image.height >= 64, "filter_bank_features: image must be >= 64x64");
  const int w = image.width, h = image.height;
  const std::size_t n = static_cast<std::size_t>(w) * h;
  nn::Tensor3<float> full(h, w, kF2Channels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* p = image.pixels.data() + 3 * i;
    const double r = p[0] / 255.0, g = p[1] / 255.0, b = p[2] / 255.0;
    const double rg = 0.5 * (r - g), by = 0.5 * (b - 0.5 * (r + g));
    const double chroma = std::hypot(rg, by);
    float* out = full.values.data() + i * kF2Channels;
    if (chroma == 0.0) continue;
    const double hue = std::atan2(by, rg);
    for (int k = 0; k < kF2Channels; ++k) {
      const double c = std::cos(hue - 2.0 * std::numbers::pi * k / kF2Channels);
      out[k] = c > 0.0 ? static_cast<float>(detail::kF2Gain * chroma * std::pow(c, detail::kHueTuning)) : 0.0f;
    }
  }

  const auto& bank = detail::FilterBank::instance();
  auto f2 = detail::blur_pool(full, kF2Stride);
  auto f3_pre = nn::conv_forward(bank.to_f3, f2);
  nn::relu_inplace(f3_pre);
  auto f3 = detail::blur_pool(f3_pre, 2);
  auto f4_pre = nn::conv_forward(bank.to_f4, f3);
  nn::relu_inplace(f4_pre);
  auto f4 = detail::blur_pool(f4_pre, 2);

  auto teacher = nn::conv_forward(bank.teacher_f4, f4);
  nn::add_inplace(teacher, nn::conv_forward(bank.teacher_f3, detail::blur_pool(f3, 2)));
  nn::add_inplace(teacher, nn::conv_forward(bank.teacher_f2, detail::blur_pool(f2, 4)));
  nn::relu_inplace(teacher);

  MultiScaleFeatures out;
  out.f2 = nn::to_feature_map(f2, kF2Stride);
  out.f3 = nn::to_feature_map(f3, kF3Stride);
  out.f4 = nn::to_feature_map(f4, kF4Stride);
  out.teacher = nn::to_feature_map(teacher, kTeacherStride);
  return out;
}

}  // namespace sir
