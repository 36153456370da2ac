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
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "sir/rng.hpp"
#include "sir/scene.hpp"
#include "sir/splice.hpp"
#include "sir/tensor.hpp"

namespace sir {

inline constexpr int kSpuriousClass = 3;

struct OracleOptions {
  // Corner noise amplitude as a fraction of box width/height.
  double jitter = 0.0;
  std::uint64_t seed = 0;
  double drop_probability = 0.0;
  // Expected number of spurious boxes per image.
  double spurious_rate = 0.0;
};

namespace detail {

inline std::uint64_t box_key(const Detection& d) {
  std::uint64_t h = mix_seed(static_cast<std::uint64_t>(d.class_id));
  for (float v : {d.box.x1, d.box.y1, d.box.x2, d.box.y2}) {
    h = mix_seed(h, std::bit_cast<std::uint32_t>(v));
  }
  return h;
}

inline Box clip_box(Box b, int width, int height) {
  b.x1 = std::clamp(b.x1, 0.f, static_cast<float>(width));
  b.x2 = std::clamp(b.x2, 0.f, static_cast<float>(width));
  b.y1 = std::clamp(b.y1, 0.f, static_cast<float>(height));
  b.y2 = std::clamp(b.y2, 0.f, static_cast<float>(height));
  auto widen = [](float& lo, float& hi, float extent) {
    if (hi - lo >= 1.f) return;
    const float mid = std::clamp(0.5f * (lo + hi), 0.5f, extent - 0.5f);
    lo = mid - 0.5f;
    hi = mid + 0.5f;
  };
  widen(b.x1, b.x2, static_cast<float>(width));
  widen(b.y1, b.y2, static_cast<float>(height));
  return b;
}

}  // namespace detail

// Stand-in detector. Perturbs each ground-truth box by uniform corner noise
// and assigns a score in [0.5, 1]. The noise for a box depends only on
// (seed, box, class), so identical content yields identical detections
// across images, as a deterministic detector would.
inline std::vector<Detection> detection_oracle(const std::vector<Detection>& truth, int width,
                                               int height, const OracleOptions& opt) {
  require(opt.jitter >= 0.0, "detection_oracle: jitter must be >= 0");
  std::vector<Detection> out;
  std::uint64_t image_key = mix_seed(opt.seed, 0xd37ec7ULL);
  for (const auto& d : truth) {
    Rng rng(mix_seed(opt.seed, detail::box_key(d)));
    image_key = mix_seed(image_key, detail::box_key(d));
    const double w = d.box.width(), h = d.box.height();
    Box b = d.box;
    if (opt.jitter > 0.0) {
      b.x1 = static_cast<float>(b.x1 + rng.uniform(-1.0, 1.0) * opt.jitter * w);
      b.y1 = static_cast<float>(b.y1 + rng.uniform(-1.0, 1.0) * opt.jitter * h);
      b.x2 = static_cast<float>(b.x2 + rng.uniform(-1.0, 1.0) * opt.jitter * w);
      b.y2 = static_cast<float>(b.y2 + rng.uniform(-1.0, 1.0) * opt.jitter * h);
      if (b.x2 < b.x1) std::swap(b.x1, b.x2);
      if (b.y2 < b.y1) std::swap(b.y1, b.y2);
    } else {
      rng.uniform();
      rng.uniform();
      rng.uniform();
      rng.uniform();
    }
    const float score = static_cast<float>(0.5 + 0.5 * rng.uniform());
    if (opt.drop_probability > 0.0 && rng.bernoulli(opt.drop_probability)) continue;
    out.push_back({detail::clip_box(b, width, height), score, d.class_id});
  }
  if (opt.spurious_rate > 0.0) {
    Rng rng(image_key);
    const int whole = static_cast<int>(std::floor(opt.spurious_rate));
    const int count = whole + (rng.bernoulli(opt.spurious_rate - whole) ? 1 : 0);
    for (int i = 0; i < count; ++i) {
      const double bw = rng.uniform(0.1, 0.4) * width, bh = rng.uniform(0.1, 0.4) * height;
      const double x1 = rng.uniform(0.0, width - bw), y1 = rng.uniform(0.0, height - bh);
      const Box b{static_cast<float>(x1), static_cast<float>(y1), static_cast<float>(x1 + bw),
                  static_cast<float>(y1 + bh)};
      out.push_back({detail::clip_box(b, width, height),
                     static_cast<float>(0.5 + 0.5 * rng.uniform()), kSpuriousClass});
    }
  }
  return out;
}

inline std::vector<Detection> detection_oracle(const Scene& scene, const OracleOptions& opt) {
  return detection_oracle(ground_truth(scene), scene.image.width, scene.image.height, opt);
}

inline std::vector<Detection> detection_oracle(const SplicedPair& pair, const OracleOptions& opt) {
  return detection_oracle(pair.objects, pair.spliced.width, pair.spliced.height, opt);
}

inline std::vector<Detection> detection_oracle(const Scene& scene, double jitter, std::uint64_t seed) {
  return detection_oracle(scene, OracleOptions{jitter, seed, 0.0, 0.0});
}

inline std::vector<Detection> detection_oracle(const SplicedPair& pair, double jitter,
                                               std::uint64_t seed) {
  return detection_oracle(pair, OracleOptions{jitter, seed, 0.0, 0.0});
}

}  // namespace sir
