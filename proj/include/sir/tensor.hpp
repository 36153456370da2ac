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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sir/error.hpp"

namespace sir {

// Axis-aligned box in image pixel coordinates, [x1, x2) x [y1, y2).
struct Box {
  float x1 = 0.f;
  float y1 = 0.f;
  float x2 = 0.f;
  float y2 = 0.f;

  float width() const { return x2 - x1; }
  float height() const { return y2 - y1; }
  double area() const { return static_cast<double>(width()) * height(); }
  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x2 > x1 && y2 > y1;
  }
  friend bool operator==(const Box&, const Box&) = default;
};

// A scored, class-labelled box as produced by a detector.
struct Detection {
  Box box;
  float score = 0.f;
  int class_id = 0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

// Dense activation grid, row-major [height][width][channels]. One cell covers
// `stride` image pixels along each axis.
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(int width, int height, int channels, float stride)
      : width_(width), height_(height), channels_(channels), stride_(stride) {
    require(width >= 1 && height >= 1 && channels >= 1,
            "feature map dimensions must be >= 1");
    require(stride > 0.f && std::isfinite(stride), "feature map stride must be > 0");
    data_.assign(static_cast<std::size_t>(width) * height * channels, 0.f);
  }

  FeatureMap(int width, int height, int channels, float stride, std::vector<float> data)
      : FeatureMap(width, height, channels, stride) {
    require(data.size() == data_.size(), "feature map data length mismatch");
    data_ = std::move(data);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  float stride() const { return stride_; }
  bool empty() const { return data_.empty(); }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> cell(int y, int x) {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const float> cell(int y, int x) const {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<float>& data() { return data_; }
  const std::vector<float>& data() const { return data_; }

  bool same_shape(const FeatureMap& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
  }

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  float stride_ = 1.f;
  std::vector<float> data_;
};

// Fixed-length descriptor. `normalized` is set only by l2_normalized().
struct Descriptor {
  std::vector<float> values;
  bool normalized = false;

  int dim() const { return static_cast<int>(values.size()); }
};

inline double squared_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return s;
}

inline double squared_distance(std::span<const float> a, std::span<const float> b) {
  require(a.size() == b.size(), "dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    s += d * d;
  }
  return s;
}

// Throws ZeroNormError when the input has no direction.
inline Descriptor l2_normalized(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError("non-finite descriptor value");
    s += x * x;
  }
  if (!(s > 0.0)) throw ZeroNormError();
  const double inv = 1.0 / std::sqrt(s);
  Descriptor d;
  d.values.resize(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) d.values[i] = static_cast<float>(v[i] * inv);
  d.normalized = true;
  return d;
}

inline Descriptor l2_normalized(std::span<const float> v) {
  std::vector<double> tmp(v.begin(), v.end());
  return l2_normalized(std::span<const double>(tmp));
}

}  // namespace sir
