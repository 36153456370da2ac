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

#include <cmath>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/raster.hpp"
#include "sir/scene.hpp"

namespace sir {

// Maps source coordinates to target coordinates: p_t = scale * p_s + (tx, ty).
struct Placement {
  double scale = 1.0;
  double tx = 0.0;
  double ty = 0.0;
};

inline constexpr double kSurvivingFraction = 0.5;

struct SplicedPair {
  Raster spliced;
  std::string source_id;
  std::string target_id;
  BinaryMask gt_mask;
  Box spliced_box;
  int source_object = 0;
  Placement placement;
  // Ground-truth objects visible in the spliced image: target objects that
  // keep at least half their pixels, then the spliced object last.
  std::vector<Detection> objects;
};

inline Box place_box(const Box& b, const Placement& p) {
  return {static_cast<float>(p.scale * b.x1 + p.tx), static_cast<float>(p.scale * b.y1 + p.ty),
          static_cast<float>(p.scale * b.x2 + p.tx), static_cast<float>(p.scale * b.y2 + p.ty)};
}

// Composites the masked pixels of source object `object_idx` into a copy of
// the target. Each destination pixel takes the source pixel containing its
// inverse-mapped center (nearest neighbour, so no colors are invented).
inline SplicedPair splice(const Scene& source, const Scene& target, int object_idx,
                          const Placement& placement) {
  require(object_idx >= 0 && object_idx < static_cast<int>(source.objects.size()),
          "splice: object index out of range");
  require(placement.scale > 0.0 && std::isfinite(placement.scale) && std::isfinite(placement.tx) &&
              std::isfinite(placement.ty),
          "splice: invalid placement");
  const auto& obj = source.objects[object_idx];
  const Box& sb = obj.detection.box;
  const double dx1 = placement.scale * sb.x1 + placement.tx;
  const double dy1 = placement.scale * sb.y1 + placement.ty;
  const double dx2 = placement.scale * sb.x2 + placement.tx;
  const double dy2 = placement.scale * sb.y2 + placement.ty;
  const Raster& dst_img = target.image;
  constexpr double kSlack = 1e-9;
  if (dx1 < -kSlack || dy1 < -kSlack || dx2 > dst_img.width + kSlack || dy2 > dst_img.height + kSlack) {
    throw InvalidArgument("splice: out-of-bounds placement");
  }

  SplicedPair pair;
  pair.spliced = dst_img;
  pair.source_id = source.id;
  pair.target_id = target.id;
  pair.source_object = object_idx;
  pair.placement = placement;
  pair.gt_mask = BinaryMask(dst_img.width, dst_img.height);

  const int px0 = std::max(0, static_cast<int>(std::floor(dx1)));
  const int py0 = std::max(0, static_cast<int>(std::floor(dy1)));
  const int px1 = std::min(dst_img.width, static_cast<int>(std::ceil(dx2)));
  const int py1 = std::min(dst_img.height, static_cast<int>(std::ceil(dy2)));
  for (int y = py0; y < py1; ++y) {
    const double sy = ((y + 0.5) - placement.ty) / placement.scale;
    const int iy = static_cast<int>(std::floor(sy));
    if (iy < 0 || iy >= source.image.height) continue;
    for (int x = px0; x < px1; ++x) {
      const double sx = ((x + 0.5) - placement.tx) / placement.scale;
      const int ix = static_cast<int>(std::floor(sx));
      if (ix < 0 || ix >= source.image.width) continue;
      if (!obj.mask.at(iy, ix)) continue;
      const auto* s = source.image.px(iy, ix);
      auto* d = pair.spliced.px(y, x);
      d[0] = s[0];
      d[1] = s[1];
      d[2] = s[2];
      pair.gt_mask.at(y, x) = 1;
    }
  }
  pair.spliced_box = mask_bounds(pair.gt_mask);
  if (!pair.spliced_box.valid()) throw InvalidArgument("splice: placement leaves no visible pixels");

  for (const auto& t : target.objects) {
    BinaryMask visible = t.mask;
    std::size_t total = 0, kept = 0;
    for (std::size_t i = 0; i < visible.bits.size(); ++i) {
      if (!visible.bits[i]) continue;
      ++total;
      if (pair.gt_mask.bits[i]) {
        visible.bits[i] = 0;
      } else {
        ++kept;
      }
    }
    if (total == 0 || static_cast<double>(kept) < kSurvivingFraction * total) continue;
    Detection d = t.detection;
    d.box = mask_bounds(visible);
    pair.objects.push_back(d);
  }
  pair.objects.push_back({pair.spliced_box, 1.f, obj.detection.class_id});
  return pair;
}

}  // namespace sir
