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
#include <limits>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Channelwise spatial max of an ROI grid followed by L2 normalization.
inline Descriptor pool_object_embedding(const FeatureMap& roi) {
  require(!roi.empty(), "pool_object_embedding: empty roi");
  std::vector<double> best(roi.channels(), -std::numeric_limits<double>::infinity());
  for (int y = 0; y < roi.height(); ++y) {
    for (int x = 0; x < roi.width(); ++x) {
      const auto cell = roi.cell(y, x);
      for (int c = 0; c < roi.channels(); ++c) best[c] = std::max(best[c], double{cell[c]});
    }
  }
  return l2_normalized(std::span<const double>(best));
}

enum class GlobalMethod { Mac, Spoc, Gem, Rmac };

struct GlobalPooling {
  GlobalMethod method = GlobalMethod::Mac;
  double gem_p = 3.0;
  int rmac_levels = 3;
};

inline constexpr double kGemClamp = 1e-6;
inline constexpr double kRmacOverlap = 0.4;

inline std::string to_string(GlobalMethod m) {
  switch (m) {
    case GlobalMethod::Mac: return "mac";
    case GlobalMethod::Spoc: return "spoc";
    case GlobalMethod::Gem: return "gem";
    case GlobalMethod::Rmac: return "rmac";
  }
  return "?";
}

// Axis-aligned square region in cell coordinates, [x, x + size) x [y, y + size).
struct CellRegion {
  int x = 0;
  int y = 0;
  int size = 0;
};

// R-MAC region grid. Level l uses squares of side 2 * min(W, H) / (l + 1);
// along each axis the square is repeated at evenly spaced offsets, with the
// count picked so consecutive squares overlap by at least 40%.
inline std::vector<CellRegion> rmac_regions(int width, int height, int levels) {
  require(levels >= 1, "rmac: levels must be >= 1");
  std::vector<CellRegion> regions;
  const int shortest = std::min(width, height);
  for (int level = 1; level <= levels; ++level) {
    const int side = std::max(1, static_cast<int>(std::floor(2.0 * shortest / (level + 1))));
    auto positions = [&](int extent) {
      std::vector<int> pos;
      if (side >= extent) {
        pos.push_back(0);
        return pos;
      }
      const double free = extent - side;
      const int count = 1 + static_cast<int>(std::ceil(free / (side * (1.0 - kRmacOverlap))));
      for (int i = 0; i < count; ++i) {
        pos.push_back(static_cast<int>(std::lround(free * i / (count - 1))));
      }
      return pos;
    };
    const auto ys = positions(height);
    const auto xs = positions(width);
    for (int y : ys) {
      for (int x : xs) regions.push_back({x, y, std::min(side, std::min(width, height))});
    }
  }
  return regions;
}

namespace detail {

inline std::vector<double> region_max(const FeatureMap& fm, const CellRegion& r) {
  std::vector<double> best(fm.channels(), -std::numeric_limits<double>::infinity());
  const int y_end = std::min(fm.height(), r.y + r.size);
  const int x_end = std::min(fm.width(), r.x + r.size);
  for (int y = r.y; y < y_end; ++y) {
    for (int x = r.x; x < x_end; ++x) {
      const auto cell = fm.cell(y, x);
      for (int c = 0; c < fm.channels(); ++c) best[c] = std::max(best[c], double{cell[c]});
    }
  }
  return best;
}

}  // namespace detail

// Global descriptor before the final L2 normalization.
inline std::vector<double> pool_global_raw(const FeatureMap& fm, const GlobalPooling& cfg) {
  require(!fm.empty(), "pool_global: empty feature map");
  const int channels = fm.channels();
  const double cells = static_cast<double>(fm.width()) * fm.height();
  std::vector<double> out(channels, 0.0);
  switch (cfg.method) {
    case GlobalMethod::Mac:
      return detail::region_max(fm, {0, 0, std::max(fm.width(), fm.height())});
    case GlobalMethod::Spoc: {
      for (int y = 0; y < fm.height(); ++y)
        for (int x = 0; x < fm.width(); ++x) {
          const auto cell = fm.cell(y, x);
          for (int c = 0; c < channels; ++c) out[c] += cell[c];
        }
      for (double& v : out) v /= cells;
      return out;
    }
    case GlobalMethod::Gem: {
      require(cfg.gem_p >= 1.0, "gem: p must be >= 1");
      for (int y = 0; y < fm.height(); ++y)
        for (int x = 0; x < fm.width(); ++x) {
          const auto cell = fm.cell(y, x);
          for (int c = 0; c < channels; ++c) {
            out[c] += std::pow(std::max(double{cell[c]}, kGemClamp), cfg.gem_p);
          }
        }
      for (double& v : out) v = std::pow(v / cells, 1.0 / cfg.gem_p);
      return out;
    }
    case GlobalMethod::Rmac: {
      for (const auto& region : rmac_regions(fm.width(), fm.height(), cfg.rmac_levels)) {
        const auto mac = detail::region_max(fm, region);
        double s = 0.0;
        for (double v : mac) s += v * v;
        if (!(s > 0.0)) continue;
        const double inv = 1.0 / std::sqrt(s);
        for (int c = 0; c < channels; ++c) out[c] += mac[c] * inv;
      }
      return out;
    }
  }
  throw InvalidArgument("pool_global: unknown method");
}

inline Descriptor pool_global(const FeatureMap& fm, const GlobalPooling& cfg) {
  const auto raw = pool_global_raw(fm, cfg);
  return l2_normalized(std::span<const double>(raw));
}

}  // namespace sir
