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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sir/embedding.hpp"
#include "sir/error.hpp"
#include "sir/features.hpp"
#include "sir/hog.hpp"
#include "sir/pooling.hpp"
#include "sir/raster.hpp"
#include "sir/roi_align.hpp"
#include "sir/student.hpp"
#include "sir/whitening.hpp"

namespace sir {

enum class Method { Mac, Spoc, Gem, Rmac, OeHog, OeTeacher, OeStudent };

struct MethodSpec {
  Method method = Method::OeTeacher;
  Variant variant = Variant::S3;  // oe-student only

  bool object_level() const { return method == Method::OeHog || method == Method::OeTeacher || method == Method::OeStudent; }
  bool needs_student() const { return method == Method::OeStudent; }

  std::string name() const {
    switch (method) {
      case Method::Mac: return "mac";
      case Method::Spoc: return "spoc";
      case Method::Gem: return "gem";
      case Method::Rmac: return "rmac";
      case Method::OeHog: return "oe-hog";
      case Method::OeTeacher: return "oe-teacher";
      case Method::OeStudent: return "oe-student-" + to_string(variant);
    }
    return "?";
  }
  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

inline MethodSpec parse_method(const std::string& s) {
  if (s == "mac") return {Method::Mac};
  if (s == "spoc") return {Method::Spoc};
  if (s == "gem") return {Method::Gem};
  if (s == "rmac") return {Method::Rmac};
  if (s == "oe-hog") return {Method::OeHog};
  if (s == "oe-teacher") return {Method::OeTeacher};
  const std::string prefix = "oe-student-";
  if (s.starts_with(prefix)) return {Method::OeStudent, parse_variant(s.substr(prefix.size()))};
  throw InvalidArgument("unknown method '" + s + "'");
}

struct PipelineConfig {
  MethodSpec method;
  int max_objects = kDefaultMaxObjects;
  bool whitening = true;
  int whitening_dim = 0;  // 0 keeps the input dimension
  double whitening_eps = kDefaultWhiteningEps;
  int roi_size = kDefaultRoiSize;
  int sampling_ratio = kDefaultSamplingRatio;
  double gem_p = 3.0;
  int rmac_levels = 3;
  int hog_patch = 32;
  int hog_cells = 4;
  int hog_bins = 8;

  void validate() const {
    require(max_objects >= 1, "pipeline: max_objects must be >= 1");
    require(whitening_dim >= 0, "pipeline: whitening_dim must be >= 0");
    require(roi_size >= 1 && sampling_ratio >= 1, "pipeline: invalid ROIAlign settings");
    require(gem_p > 0.0 && rmac_levels >= 1, "pipeline: invalid global pooling settings");
    require(hog_patch >= hog_cells && hog_cells >= 1 && hog_bins >= 2, "pipeline: invalid HoG settings");
  }
};

// Bilinear resample of the box region of `g` onto an n x n grid.
inline GrayImage crop_resample(const GrayImage& g, const Box& box, int n) {
  require(box.valid(), "crop_resample: degenerate box");
  GrayImage out(n, n);
  const double bw = box.width() / n, bh = box.height() / n;
  for (int j = 0; j < n; ++j) {
    const double y = std::clamp(box.y1 + (j + 0.5) * bh - 0.5, 0.0, g.height - 1.0);
    const int y0 = static_cast<int>(y);
    const int y1 = std::min(y0 + 1, g.height - 1);
    const double fy = y - y0;
    for (int i = 0; i < n; ++i) {
      const double x = std::clamp(box.x1 + (i + 0.5) * bw - 0.5, 0.0, g.width - 1.0);
      const int x0 = static_cast<int>(x);
      const int x1 = std::min(x0 + 1, g.width - 1);
      const double fx = x - x0;
      const double top = g.at(y0, x0) * (1 - fx) + g.at(y0, x1) * fx;
      const double bot = g.at(y1, x0) * (1 - fx) + g.at(y1, x1) * fx;
      out.at(j, i) = static_cast<float>(top * (1 - fy) + bot * fy);
    }
  }
  return out;
}

// Turns an image plus its detections into the embedding set of the
// configured method. Global methods yield one full-image embedding.
class Extractor {
 public:
  explicit Extractor(PipelineConfig cfg, std::optional<StudentParams<float>> student = std::nullopt)
      : cfg_(std::move(cfg)), student_(std::move(student)) {
    cfg_.validate();
    require(!cfg_.method.needs_student() || student_.has_value(), "pipeline: oe-student needs trained parameters");
    if (student_) {
      require(!cfg_.method.needs_student() || student_->variant == cfg_.method.variant,
              "pipeline: student variant does not match method");
    }
  }

  const PipelineConfig& config() const { return cfg_; }

  // Map that embeddings are pooled from: the student's output for
  // oe-student, the teacher map otherwise.
  FeatureMap feature_map(const Raster& image) const { return feature_map(filter_bank_features(image)); }
  FeatureMap feature_map(const MultiScaleFeatures& f) const {
    if (cfg_.method.needs_student()) return student_forward(*student_, f);
    return f.teacher;
  }

  std::vector<ObjectEmbedding> embed(const std::string& image_id, const Raster& image,
                                     const std::vector<Detection>& detections) const {
    const Box full{0.f, 0.f, static_cast<float>(image.width), static_cast<float>(image.height)};
    std::vector<ObjectEmbedding> out;
    if (cfg_.method.method == Method::OeHog) {
      const GrayImage gray = to_gray(image);
      for (const auto& d : select_top_objects(detections, cfg_.max_objects, image.width, image.height)) {
        out.push_back({hog_descriptor(crop_resample(gray, d.box, cfg_.hog_patch), cfg_.hog_cells, cfg_.hog_bins),
                       image_id, d.box, d.score});
      }
      return out;
    }
    const FeatureMap fm = feature_map(image);
    if (!cfg_.method.object_level()) {
      out.push_back({pool_global(fm, global_pooling()), image_id, full, 1.f});
      return out;
    }
    for (const auto& d : select_top_objects(detections, cfg_.max_objects, image.width, image.height)) {
      out.push_back({pool_object_embedding(roi_align(fm, d.box, cfg_.roi_size, cfg_.sampling_ratio)), image_id, d.box,
                     d.score});
    }
    return out;
  }

  GlobalPooling global_pooling() const {
    GlobalPooling g;
    switch (cfg_.method.method) {
      case Method::Mac: g.method = GlobalMethod::Mac; break;
      case Method::Spoc: g.method = GlobalMethod::Spoc; break;
      case Method::Gem: g.method = GlobalMethod::Gem; break;
      case Method::Rmac: g.method = GlobalMethod::Rmac; break;
      default: throw InvalidArgument("pipeline: " + cfg_.method.name() + " is not a global method");
    }
    g.gem_p = cfg_.gem_p;
    g.rmac_levels = cfg_.rmac_levels;
    return g;
  }

 private:
  PipelineConfig cfg_;
  std::optional<StudentParams<float>> student_;
};

inline WhiteningTransform fit_whitening(std::span<const ObjectEmbedding> embeddings, const PipelineConfig& cfg) {
  std::vector<Descriptor> samples;
  samples.reserve(embeddings.size());
  for (const auto& e : embeddings) samples.push_back(e.vector);
  require(!samples.empty(), "whitening: no training embeddings");
  const int dim = samples.front().dim();
  return fit_whitening(samples, cfg.whitening_dim == 0 ? dim : cfg.whitening_dim, cfg.whitening_eps);
}

inline void whiten_all(const WhiteningTransform& t, std::span<ObjectEmbedding> embeddings) {
  for (auto& e : embeddings) e.vector = apply_whitening(t, e.vector);
}

}  // namespace sir
