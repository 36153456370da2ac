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
#include <numbers>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Single-channel float image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float clamped(int y, int x) const {
    return at(std::clamp(y, 0, height - 1), std::clamp(x, 0, width - 1));
  }
};

// Histogram of unsigned gradient orientation over a cells x cells grid.
// Gradients are central differences with replicated borders; each pixel
// votes its magnitude into the two nearest orientation bins, bin b centered
// at b * 180 / bins degrees. Result is concatenated row-major by cell and
// L2-normalized.
inline Descriptor hog_descriptor(const GrayImage& patch, int cells, int bins) {
  require(cells >= 1, "hog: cells must be >= 1");
  require(bins >= 2, "hog: bins must be >= 2");
  require(patch.width >= cells && patch.height >= cells, "hog: patch smaller than cell grid");

  const double bin_width = 180.0 / bins;
  std::vector<double> hist(static_cast<std::size_t>(cells) * cells * bins, 0.0);
  for (int y = 0; y < patch.height; ++y) {
    const int cy = std::min(cells - 1, y * cells / patch.height);
    for (int x = 0; x < patch.width; ++x) {
      const int cx = std::min(cells - 1, x * cells / patch.width);
      const double gx = double{patch.clamped(y, x + 1)} - patch.clamped(y, x - 1);
      const double gy = double{patch.clamped(y + 1, x)} - patch.clamped(y - 1, x);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      if (angle < 0.0) angle += 180.0;
      if (angle >= 180.0) angle -= 180.0;
      const double pos = angle / bin_width;
      int lo = static_cast<int>(std::floor(pos));
      const double frac = pos - lo;
      lo %= bins;
      const int hi = (lo + 1) % bins;
      double* h = hist.data() + (static_cast<std::size_t>(cy) * cells + cx) * bins;
      h[lo] += mag * (1.0 - frac);
      h[hi] += mag * frac;
    }
  }
  return l2_normalized(std::span<const double>(hist));
}

}  // namespace sir
