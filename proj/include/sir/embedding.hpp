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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

namespace sir {

inline constexpr int kDefaultMaxObjects = 8;

// One object-level descriptor and where it came from.
struct ObjectEmbedding {
  Descriptor vector;
  std::string image_id;
  Box box;
  float score = 0.f;
};

// Highest-scoring detections first; equal scores prefer the larger box, then
// input order. With no detections the whole image stands in as one box so
// every image keeps a non-empty embedding set.
inline std::vector<Detection> select_top_objects(const std::vector<Detection>& dets, int max_objects,
                                                 int image_width, int image_height) {
  require(max_objects >= 1, "select_top_objects: max_objects must be >= 1");
  if (dets.empty()) {
    require(image_width >= 1 && image_height >= 1, "select_top_objects: invalid image size");
    return {Detection{Box{0.f, 0.f, static_cast<float>(image_width), static_cast<float>(image_height)}, 0.f, 0}};
  }
  std::vector<Detection> out = dets;
  std::stable_sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.box.area() > b.box.area();
  });
  if (static_cast<int>(out.size()) > max_objects) out.resize(max_objects);
  return out;
}

struct ImageDistance {
  double distance = std::numeric_limits<double>::infinity();
  int query_index = -1;
  int database_index = -1;
};

// Minimum squared Euclidean distance over all (query, database) embedding
// pairs and the pair attaining it; ties go to the lexicographically smallest
// (i, j).
inline ImageDistance image_distance(std::span<const ObjectEmbedding> q, std::span<const ObjectEmbedding> d) {
  require(!q.empty() && !d.empty(), "image_distance: empty embedding set");
  ImageDistance best;
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < d.size(); ++j) {
      const double dist = squared_distance(q[i].vector.values, d[j].vector.values);
      if (dist < best.distance) {
        best = {dist, static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  return best;
}

}  // namespace sir
