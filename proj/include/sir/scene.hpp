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
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/raster.hpp"
#include "sir/rng.hpp"
#include "sir/tensor.hpp"

namespace sir {

enum class ShapeKind : int { Ellipse = 0, Polygon = 1, Blob = 2 };

struct SceneParams {
  int width = 128;
  int height = 128;
  int num_objects = 2;
  int min_object_size = 28;
  int max_object_size = 52;
  int max_retries = 200;
  // Minimum free gap, in pixels, between two object masks.
  int margin = 2;
  // Minimum gap between object boxes; negative disables the box test.
  int box_margin = 12;
  // Per-channel tint amplitude of the background colors. 0 keeps the
  // background achromatic.
  double background_tint = 0.0;
  // Saturated HSV object colors instead of uniform RGB.
  bool vivid_objects = true;
};

struct SceneObject {
  Detection detection;  // class_id holds the ShapeKind
  BinaryMask mask;      // full-image mask
};

struct Scene {
  std::string id;
  Raster image;
  std::vector<SceneObject> objects;
  std::uint64_t seed = 0;
  int background_id = 0;
};

// Tight bounding box of the set pixels, [min, max + 1). Empty mask gives an
// invalid (zero) box.
inline Box mask_bounds(const BinaryMask& m) {
  int x1 = m.width, y1 = m.height, x2 = -1, y2 = -1;
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      if (!m.at(y, x)) continue;
      x1 = std::min(x1, x);
      y1 = std::min(y1, y);
      x2 = std::max(x2, x);
      y2 = std::max(y2, y);
    }
  }
  if (x2 < 0) return {};
  return {static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x2 + 1),
          static_cast<float>(y2 + 1)};
}

namespace detail {

struct Rgb {
  double r, g, b;
};

inline Rgb random_color(Rng& rng, double lo, double hi) {
  return {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
}

// Saturated color from a random hue.
inline Rgb vivid_color(Rng& rng) {
  const double h = rng.uniform(0.0, 6.0), sat = rng.uniform(0.45, 1.0), val = rng.uniform(90.0, 255.0);
  const int i = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const double p = val * (1 - sat), q = val * (1 - sat * f), t = val * (1 - sat * (1 - f));
  switch (i) {
    case 0: return {val, t, p};
    case 1: return {q, val, p};
    case 2: return {p, val, t};
    case 3: return {p, q, val};
    case 4: return {t, p, val};
    default: return {val, p, q};
  }
}

// Near-gray color: a random level plus a small per-channel tint.
inline Rgb muted_color(Rng& rng, double lo, double hi, double tint) {
  const double g = rng.uniform(lo, hi);
  return {g + rng.uniform(-tint, tint), g + rng.uniform(-tint, tint), g + rng.uniform(-tint, tint)};
}

inline Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t};
}

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

// Deterministic per-pixel noise in [-1, 1].
inline double pixel_noise(std::uint64_t seed, int x, int y) {
  const std::uint64_t h = mix_seed(seed, (static_cast<std::uint64_t>(y) << 32) | static_cast<std::uint32_t>(x));
  return static_cast<double>(h >> 11) * 0x1.0p-53 * 2.0 - 1.0;
}

inline void put(Raster& img, int y, int x, const Rgb& c) {
  auto* p = img.px(y, x);
  p[0] = to_byte(c.r);
  p[1] = to_byte(c.g);
  p[2] = to_byte(c.b);
}

struct Wave {
  double kx, ky, phase, weight;
};

inline void paint_background(Raster& img, Rng& rng, std::uint64_t noise_seed, double tint) {
  const Rgb c0 = muted_color(rng, 40, 215, tint);
  const Rgb c1 = muted_color(rng, 40, 215, tint);
  std::array<Wave, 3> waves{};
  double total = 0.0;
  for (auto& w : waves) {
    const double period = rng.uniform(24.0, 160.0);
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double k = 2.0 * std::numbers::pi / period;
    w = {k * std::cos(theta), k * std::sin(theta), rng.uniform(0.0, 2.0 * std::numbers::pi),
         rng.uniform(0.2, 1.0)};
    total += w.weight;
  }
  const double noise_amp = rng.uniform(2.0, 8.0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double s = 0.0;
      for (const auto& w : waves) s += w.weight * std::sin(w.kx * x + w.ky * y + w.phase);
      const double t = 0.5 + 0.5 * s / total;
      Rgb c = mix(c0, c1, t);
      const double n = noise_amp * pixel_noise(noise_seed, x, y);
      c.r += n;
      c.g += n;
      c.b += n;
      put(img, y, x, c);
    }
  }
}

enum class Texture { Stripes = 0, Checker = 1, Rings = 2, Waves = 3 };

struct ObjectStyle {
  Rgb primary, secondary;
  Texture texture;
  double period;
  double orientation;
};

inline double texture_value(const ObjectStyle& s, double u, double v) {
  const double k = 2.0 * std::numbers::pi / s.period;
  const double c = std::cos(s.orientation), sn = std::sin(s.orientation);
  const double a = c * u + sn * v;
  const double b = -sn * u + c * v;
  switch (s.texture) {
    case Texture::Stripes: return 0.5 + 0.5 * std::sin(k * a);
    case Texture::Checker: {
      const double t = std::sin(k * a) * std::sin(k * b);
      return t > 0 ? 1.0 : 0.0;
    }
    case Texture::Rings: return 0.5 + 0.5 * std::cos(k * std::hypot(u, v));
    case Texture::Waves: return 0.5 + 0.25 * std::sin(k * a) + 0.25 * std::sin(0.7 * k * b + 1.3);
  }
  return 0.0;
}

struct ShapeSpec {
  ShapeKind kind;
  double cx, cy, radius, aspect, rotation;
  std::vector<double> poly_angles, poly_radii;
  std::array<double, 3> blob_amp{}, blob_phase{};
};

inline bool inside(const ShapeSpec& s, double px, double py) {
  const double dx = px - s.cx, dy = py - s.cy;
  const double c = std::cos(s.rotation), sn = std::sin(s.rotation);
  const double u = c * dx + sn * dy;
  const double v = -sn * dx + c * dy;
  switch (s.kind) {
    case ShapeKind::Ellipse: {
      const double a = s.radius, b = s.radius * s.aspect;
      return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
    case ShapeKind::Polygon: {
      const std::size_t n = s.poly_angles.size();
      bool in = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = s.poly_radii[i] * std::cos(s.poly_angles[i]);
        const double yi = s.poly_radii[i] * std::sin(s.poly_angles[i]);
        const double xj = s.poly_radii[j] * std::cos(s.poly_angles[j]);
        const double yj = s.poly_radii[j] * std::sin(s.poly_angles[j]);
        if ((yi > v) != (yj > v) && u < (xj - xi) * (v - yi) / (yj - yi) + xi) in = !in;
      }
      return in;
    }
    case ShapeKind::Blob: {
      const double theta = std::atan2(v, u);
      double r = 0.76;
      for (int k = 0; k < 3; ++k) r += s.blob_amp[k] * std::cos((k + 2) * theta + s.blob_phase[k]);
      return std::hypot(u, v) <= s.radius * r;
    }
  }
  return false;
}

inline ShapeSpec random_shape(Rng& rng, const SceneParams& p) {
  ShapeSpec s;
  s.kind = static_cast<ShapeKind>(rng.below(3));
  const double size = rng.uniform(p.min_object_size, p.max_object_size);
  s.radius = size / 2.0;
  s.aspect = rng.uniform(0.55, 1.0);
  s.rotation = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.cx = rng.uniform(s.radius + 1.0, p.width - s.radius - 1.0);
  s.cy = rng.uniform(s.radius + 1.0, p.height - s.radius - 1.0);
  if (s.kind == ShapeKind::Polygon) {
    const int n = rng.uniform_int(3, 7);
    for (int i = 0; i < n; ++i) {
      const double base = 2.0 * std::numbers::pi * i / n;
      s.poly_angles.push_back(base + rng.uniform(-0.3, 0.3) * std::numbers::pi / n);
      s.poly_radii.push_back(s.radius * rng.uniform(0.75, 1.0));
    }
  } else if (s.kind == ShapeKind::Blob) {
    for (int k = 0; k < 3; ++k) {
      s.blob_amp[k] = rng.uniform(0.0, 0.08);
      s.blob_phase[k] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }
  }
  return s;
}

inline ObjectStyle random_style(Rng& rng, bool vivid) {
  ObjectStyle st;
  if (vivid) {
    st.primary = vivid_color(rng);
    st.secondary = vivid_color(rng);
  } else {
    st.primary = random_color(rng, 0, 255);
    st.secondary = random_color(rng, 0, 255);
  }
  st.texture = static_cast<Texture>(rng.below(4));
  st.period = rng.uniform(5.0, 14.0);
  st.orientation = rng.uniform(0.0, std::numbers::pi);
  return st;
}

}  // namespace detail

// Procedural scene: wavy textured background plus non-overlapping textured
// objects, each with its exact pixel mask and tight box. Fully determined by
// (seed, params).
inline Scene generate_scene(std::uint64_t seed, const SceneParams& params) {
  require(params.width >= 64 && params.height >= 64, "generate_scene: image must be >= 64x64");
  require(params.num_objects >= 0 && params.num_objects <= 16,
          "generate_scene: num_objects must be in [0, 16]");
  require(params.min_object_size >= 8 && params.max_object_size >= params.min_object_size,
          "generate_scene: invalid object size range");
  require(params.max_object_size + 2 < std::min(params.width, params.height),
          "generate_scene: objects larger than the image");
  require(params.background_tint >= 0.0, "generate_scene: background_tint must be >= 0");

  Scene scene;
  scene.seed = seed;
  scene.id = "scene-" + std::to_string(seed);
  scene.image = Raster(params.width, params.height);

  Rng rng(mix_seed(seed, 1));
  scene.background_id = static_cast<int>(rng.below(1u << 20));
  detail::paint_background(scene.image, rng, mix_seed(seed, 2), params.background_tint);

  BinaryMask occupied(params.width, params.height);
  for (int i = 0; i < params.num_objects; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < params.max_retries && !placed; ++attempt) {
      const auto shape = detail::random_shape(rng, params);
      BinaryMask mask(params.width, params.height);
      const int r = static_cast<int>(std::ceil(shape.radius)) + 1;
      const int x0 = std::max(0, static_cast<int>(shape.cx) - r);
      const int x1 = std::min(params.width - 1, static_cast<int>(shape.cx) + r);
      const int y0 = std::max(0, static_cast<int>(shape.cy) - r);
      const int y1 = std::min(params.height - 1, static_cast<int>(shape.cy) + r);
      bool clash = false;
      std::size_t area = 0;
      for (int y = y0; y <= y1 && !clash; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!detail::inside(shape, x + 0.5, y + 0.5)) continue;
          for (int dy = -params.margin; dy <= params.margin && !clash; ++dy) {
            for (int dx = -params.margin; dx <= params.margin; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy >= 0 && yy < params.height && xx >= 0 && xx < params.width && occupied.at(yy, xx)) {
                clash = true;
                break;
              }
            }
          }
          if (clash) break;
          mask.at(y, x) = 1;
          ++area;
        }
      }
      if (clash || area < 24) continue;
      if (params.box_margin >= 0) {
        const Box b = mask_bounds(mask);
        const float g = static_cast<float>(params.box_margin);
        for (const auto& o : scene.objects) {
          const Box& ob = o.detection.box;
          if (b.x1 < ob.x2 + g && ob.x1 < b.x2 + g && b.y1 < ob.y2 + g && ob.y1 < b.y2 + g) {
            clash = true;
            break;
          }
        }
        if (clash) continue;
      }

      const auto style = detail::random_style(rng, params.vivid_objects);
      const std::uint64_t noise_seed = mix_seed(seed, 100 + static_cast<std::uint64_t>(i));
      const double c = std::cos(shape.rotation), sn = std::sin(shape.rotation);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (!mask.at(y, x)) continue;
          const double dx = x + 0.5 - shape.cx, dy = y + 0.5 - shape.cy;
          const double t = detail::texture_value(style, c * dx + sn * dy, -sn * dx + c * dy);
          auto col = detail::mix(style.primary, style.secondary, t);
          const double n = 3.0 * detail::pixel_noise(noise_seed, x, y);
          col.r += n;
          col.g += n;
          col.b += n;
          detail::put(scene.image, y, x, col);
          occupied.at(y, x) = 1;
        }
      }
      SceneObject obj;
      obj.detection.box = mask_bounds(mask);
      obj.detection.score = 1.f;
      obj.detection.class_id = static_cast<int>(shape.kind);
      obj.mask = std::move(mask);
      scene.objects.push_back(std::move(obj));
      placed = true;
    }
    if (!placed) {
      throw Error("generate_scene: could not place object " + std::to_string(i) + " after " +
                  std::to_string(params.max_retries) + " attempts");
    }
  }
  return scene;
}

inline std::vector<Detection> ground_truth(const Scene& scene) {
  std::vector<Detection> out;
  for (const auto& o : scene.objects) out.push_back(o.detection);
  return out;
}

}  // namespace sir
