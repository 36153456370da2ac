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
#include <cmath>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

namespace sir {

inline constexpr int kDefaultRoiSize = 7;
inline constexpr int kDefaultSamplingRatio = 2;

namespace detail {

// Bilinear read at a point already clamped to [0, W-1] x [0, H-1]. Feature
// values sit at integer grid coordinates.
inline void bilinear_accumulate(const FeatureMap& fm, double y, double x, double weight,
                                std::vector<double>& acc) {
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, fm.height() - 1);
  const int x1 = std::min(x0 + 1, fm.width() - 1);
  const double ly = y - y0;
  const double lx = x - x0;
  const double w00 = (1.0 - ly) * (1.0 - lx) * weight;
  const double w01 = (1.0 - ly) * lx * weight;
  const double w10 = ly * (1.0 - lx) * weight;
  const double w11 = ly * lx * weight;
  const auto c00 = fm.cell(y0, x0);
  const auto c01 = fm.cell(y0, x1);
  const auto c10 = fm.cell(y1, x0);
  const auto c11 = fm.cell(y1, x1);
  for (int c = 0; c < fm.channels(); ++c) {
    acc[c] += w00 * c00[c] + w01 * c01[c] + w10 * c10[c] + w11 * c11[c];
  }
}

}  // namespace detail

// Pools the region `box` (image pixels) of `fm` into an out_size x out_size
// grid. Each bin is the mean of sampling_ratio^2 bilinear samples placed at
// bin_origin + (s + 0.5) * step - 0.5 in feature coordinates.
//
// The box is clipped to the map extent first; a box that has no area left
// after clipping is rejected rather than pooled to zeros.
inline FeatureMap roi_align(const FeatureMap& fm, const Box& box,
                            int out_size = kDefaultRoiSize,
                            int sampling_ratio = kDefaultSamplingRatio) {
  require(!fm.empty(), "roi_align: empty feature map");
  require(out_size >= 1, "roi_align: out_size must be >= 1");
  require(sampling_ratio >= 1, "roi_align: sampling_ratio must be >= 1");
  require(box.valid(), "roi_align: invalid box");

  const double inv_stride = 1.0 / fm.stride();
  const double fx1 = std::clamp(box.x1 * inv_stride, 0.0, static_cast<double>(fm.width()));
  const double fy1 = std::clamp(box.y1 * inv_stride, 0.0, static_cast<double>(fm.height()));
  const double fx2 = std::clamp(box.x2 * inv_stride, 0.0, static_cast<double>(fm.width()));
  const double fy2 = std::clamp(box.y2 * inv_stride, 0.0, static_cast<double>(fm.height()));
  if (!(fx2 > fx1) || !(fy2 > fy1)) {
    throw InvalidArgument("roi_align: box has zero area inside the feature map");
  }

  const double bin_w = (fx2 - fx1) / out_size;
  const double bin_h = (fy2 - fy1) / out_size;
  const double step_x = bin_w / sampling_ratio;
  const double step_y = bin_h / sampling_ratio;
  const double max_x = fm.width() - 1;
  const double max_y = fm.height() - 1;
  const double weight = 1.0 / (sampling_ratio * sampling_ratio);

  FeatureMap out(out_size, out_size, fm.channels(), 1.f);
  std::vector<double> acc(fm.channels());
  for (int by = 0; by < out_size; ++by) {
    for (int bx = 0; bx < out_size; ++bx) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (int sy = 0; sy < sampling_ratio; ++sy) {
        const double y = std::clamp(fy1 + by * bin_h + (sy + 0.5) * step_y - 0.5, 0.0, max_y);
        for (int sx = 0; sx < sampling_ratio; ++sx) {
          const double x =
              std::clamp(fx1 + bx * bin_w + (sx + 0.5) * step_x - 0.5, 0.0, max_x);
          detail::bilinear_accumulate(fm, y, x, weight, acc);
        }
      }
      auto dst = out.cell(by, bx);
      for (int c = 0; c < fm.channels(); ++c) dst[c] = static_cast<float>(acc[c]);
    }
  }
  return out;
}

}  // namespace sir
