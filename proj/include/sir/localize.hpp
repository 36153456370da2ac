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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/features.hpp"
#include "sir/index.hpp"
#include "sir/raster.hpp"
#include "sir/tensor.hpp"

namespace sir {

// Axis-aligned map p' = (sx * x + tx, sy * y + ty) in image pixels.
struct AffineTransform {
  double sx = 1.0, sy = 1.0, tx = 0.0, ty = 0.0;

  double apply_x(double x) const { return sx * x + tx; }
  double apply_y(double y) const { return sy * y + ty; }
  Box apply(const Box& b) const {
    return {static_cast<float>(apply_x(b.x1)), static_cast<float>(apply_y(b.y1)), static_cast<float>(apply_x(b.x2)),
            static_cast<float>(apply_y(b.y2))};
  }
  AffineTransform inverse() const { return {1.0 / sx, 1.0 / sy, -tx / sx, -ty / sy}; }
  bool is_identity() const { return sx == 1.0 && sy == 1.0 && tx == 0.0 && ty == 0.0; }
  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

// The transform taking box_q onto box_d.
inline AffineTransform estimate_transform(const Box& box_q, const Box& box_d) {
  require(box_q.valid() && box_d.valid(), "estimate_transform: degenerate box");
  AffineTransform t;
  t.sx = (double{box_d.x2} - box_d.x1) / (double{box_q.x2} - box_q.x1);
  t.sy = (double{box_d.y2} - box_d.y1) / (double{box_q.y2} - box_q.y1);
  t.tx = box_d.x1 - t.sx * box_q.x1;
  t.ty = box_d.y1 - t.sy * box_q.y1;
  return t;
}

struct WarpedRaster {
  Raster image;
  BinaryMask valid;
};

// Resamples `img` into an out_width x out_height frame under `t`. Each output
// pixel center is mapped back through t^-1 and sampled bilinearly; pixels
// whose preimage falls outside the source extent are zero and invalid.
inline WarpedRaster warp_image(const Raster& img, const AffineTransform& t, int out_width, int out_height) {
  require(t.sx > 0 && t.sy > 0 && std::isfinite(t.tx) && std::isfinite(t.ty), "warp_image: invalid transform");
  require(out_width >= 1 && out_height >= 1, "warp_image: invalid output size");
  WarpedRaster w{Raster(out_width, out_height), BinaryMask(out_width, out_height)};
  if (t.is_identity() && img.width == out_width && img.height == out_height) {
    w.image = img;
    std::fill(w.valid.bits.begin(), w.valid.bits.end(), std::uint8_t{1});
    return w;
  }
  const auto inv = t.inverse();
  constexpr double kSlack = 1e-9;
  for (int y = 0; y < out_height; ++y) {
    const double v = inv.apply_y(y + 0.5) - 0.5;
    if (v < -0.5 - kSlack || v > img.height - 0.5 + kSlack) continue;
    const double cv = std::clamp(v, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(cv);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = cv - y0;
    for (int x = 0; x < out_width; ++x) {
      const double u = inv.apply_x(x + 0.5) - 0.5;
      if (u < -0.5 - kSlack || u > img.width - 0.5 + kSlack) continue;
      const double cu = std::clamp(u, 0.0, img.width - 1.0);
      const int x0 = static_cast<int>(cu);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double fx = cu - x0;
      auto* dst = w.image.px(y, x);
      for (int c = 0; c < 3; ++c) {
        const double top = img.px(y0, x0)[c] * (1 - fx) + img.px(y0, x1)[c] * fx;
        const double bot = img.px(y1, x0)[c] * (1 - fx) + img.px(y1, x1)[c] * fx;
        dst[c] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bot * fy), 0L, 255L));
      }
      w.valid.at(y, x) = 1;
    }
  }
  return w;
}

// Nearest-neighbour counterpart of warp_image for masks.
inline BinaryMask warp_mask(const BinaryMask& m, const AffineTransform& t, int out_width, int out_height) {
  BinaryMask out(out_width, out_height);
  const auto inv = t.inverse();
  for (int y = 0; y < out_height; ++y) {
    const auto v = static_cast<long>(std::floor(inv.apply_y(y + 0.5)));
    if (v < 0 || v >= m.height) continue;
    for (int x = 0; x < out_width; ++x) {
      const auto u = static_cast<long>(std::floor(inv.apply_x(x + 0.5)));
      if (u >= 0 && u < m.width) out.at(y, x) = m.at(static_cast<int>(v), static_cast<int>(u));
    }
  }
  return out;
}

// A cell is valid when every pixel of its stride x stride footprint is.
inline BinaryMask cell_validity(const BinaryMask& pixels, int cells_w, int cells_h, float stride) {
  BinaryMask out(cells_w, cells_h);
  const int s = static_cast<int>(stride);
  for (int cy = 0; cy < cells_h; ++cy) {
    for (int cx = 0; cx < cells_w; ++cx) {
      bool ok = true;
      for (int y = cy * s; ok && y < std::min(pixels.height, (cy + 1) * s); ++y) {
        for (int x = cx * s; x < std::min(pixels.width, (cx + 1) * s); ++x) {
          if (!pixels.at(y, x)) {
            ok = false;
            break;
          }
        }
      }
      out.at(cy, cx) = ok;
    }
  }
  return out;
}

// Q(y, x) = sum_c (fq - fd)^2; cells flagged invalid are 0.
inline FeatureMap residual_map(const FeatureMap& fq, const FeatureMap& fd, const BinaryMask* valid = nullptr) {
  require(fq.same_shape(fd), "residual_map: feature map shape mismatch");
  if (valid) {
    require(valid->width == fq.width() && valid->height == fq.height(), "residual_map: validity grid mismatch");
  }
  FeatureMap q(fq.width(), fq.height(), 1, fq.stride());
  for (int y = 0; y < fq.height(); ++y) {
    for (int x = 0; x < fq.width(); ++x) {
      if (valid && !valid->at(y, x)) continue;
      const auto a = fq.cell(y, x), b = fd.cell(y, x);
      double s = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) {
        const double d = double{a[c]} - b[c];
        s += d * d;
      }
      q.at(y, x, 0) = static_cast<float>(s);
    }
  }
  return q;
}

// Q bilinearly upsampled to pixel resolution (cell values sit at cell
// centers).
inline std::vector<double> upsample_residual(const FeatureMap& q, int width, int height) {
  require(q.channels() == 1, "upsample_residual: residual must have one channel");
  require(width >= 1 && height >= 1, "upsample_residual: invalid image size");
  std::vector<double> out(static_cast<std::size_t>(width) * height);
  const double s = q.stride();
  for (int y = 0; y < height; ++y) {
    const double cy = std::clamp((y + 0.5) / s - 0.5, 0.0, q.height() - 1.0);
    const int y0 = static_cast<int>(cy);
    const int y1 = std::min(y0 + 1, q.height() - 1);
    const double fy = cy - y0;
    for (int x = 0; x < width; ++x) {
      const double cx = std::clamp((x + 0.5) / s - 0.5, 0.0, q.width() - 1.0);
      const int x0 = static_cast<int>(cx);
      const int x1 = std::min(x0 + 1, q.width() - 1);
      const double fx = cx - x0;
      const double top = q.at(y0, x0, 0) * (1 - fx) + q.at(y0, x1, 0) * fx;
      const double bot = q.at(y1, x0, 0) * (1 - fx) + q.at(y1, x1, 0) * fx;
      out[static_cast<std::size_t>(y) * width + x] = top * (1 - fy) + bot * fy;
    }
  }
  return out;
}

inline BinaryMask threshold_values(std::span<const double> values, double thr, int width, int height,
                                   const BinaryMask* valid = nullptr) {
  require(thr >= 0.0, "threshold_mask: threshold must be >= 0");
  BinaryMask m(width, height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) {
    m.bits[i] = values[i] > thr && (!valid || valid->bits[i]);
  }
  return m;
}

inline BinaryMask threshold_mask(const FeatureMap& q, double thr, int width, int height) {
  require(thr >= 0.0, "threshold_mask: threshold must be >= 0");
  const auto up = upsample_residual(q, width, height);
  return threshold_values(up, thr, width, height);
}

struct Confusion {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;
};

inline Confusion confusion(const BinaryMask& pred, const BinaryMask& gt) {
  require(pred.same_dims(gt), "mask_scores: dimension mismatch");
  Confusion c;
  for (std::size_t i = 0; i < pred.bits.size(); ++i) {
    const bool p = pred.bits[i] != 0, g = gt.bits[i] != 0;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct MaskScores {
  double f1 = 0.0;
  double mcc = 0.0;
};

// F1 is 0 when there are no positives in either mask; MCC is 0 whenever its
// denominator vanishes.
inline MaskScores scores_from(const Confusion& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn), tn = static_cast<double>(c.tn);
  MaskScores s;
  const double f1_den = 2 * tp + fp + fn;
  s.f1 = f1_den > 0 ? 2 * tp / f1_den : 0.0;
  const double mcc_den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  s.mcc = mcc_den > 0 ? (tp * tn - fp * fn) / std::sqrt(mcc_den) : 0.0;
  return s;
}

inline MaskScores mask_scores(const BinaryMask& pred, const BinaryMask& gt) { return scores_from(confusion(pred, gt)); }

inline constexpr int kDefaultThresholdGrid = 64;

struct ThresholdSweep {
  double f1_threshold = 0.0;
  double f1 = 0.0;
  double mcc_threshold = 0.0;
  double mcc = 0.0;
};

// `grid` thresholds at evenly spaced quantiles (0 through 1) of the
// residual values at valid pixels.
inline std::vector<double> quantile_grid(std::span<const double> values, int grid, const BinaryMask* valid = nullptr) {
  require(grid >= 1, "quantile_grid: grid must be >= 1");
  std::vector<double> v;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!valid || valid->bits[i]) v.push_back(values[i]);
  }
  if (v.empty()) return {0.0};
  std::sort(v.begin(), v.end());
  std::vector<double> out;
  for (int i = 0; i < grid; ++i) {
    const std::size_t k = grid == 1 ? 0 : static_cast<std::size_t>(std::llround(double(i) * (v.size() - 1) / (grid - 1)));
    const double t = std::max(0.0, v[k]);
    if (out.empty() || t != out.back()) out.push_back(t);
  }
  return out;
}

inline ThresholdSweep optimal_threshold(std::span<const double> values, const BinaryMask& gt,
                                        std::span<const double> grid, const BinaryMask* valid = nullptr) {
  require(values.size() == gt.bits.size(), "optimal_threshold: dimension mismatch");
  require(!grid.empty(), "optimal_threshold: empty grid");
  ThresholdSweep best;
  best.f1 = best.mcc = -2.0;
  for (double thr : grid) {
    const auto s = mask_scores(threshold_values(values, thr, gt.width, gt.height, valid), gt);
    if (s.f1 > best.f1) best.f1 = s.f1, best.f1_threshold = thr;
    if (s.mcc > best.mcc) best.mcc = s.mcc, best.mcc_threshold = thr;
  }
  return best;
}

inline ThresholdSweep optimal_threshold(const FeatureMap& q, const BinaryMask& gt, int grid = kDefaultThresholdGrid) {
  const auto up = upsample_residual(q, gt.width, gt.height);
  const auto thresholds = quantile_grid(up, grid);
  return optimal_threshold(up, gt, thresholds);
}

enum class ResidualLevel { F2, F3, F4, Teacher };

inline std::string to_string(ResidualLevel l) {
  switch (l) {
    case ResidualLevel::F2: return "f2";
    case ResidualLevel::F3: return "f3";
    case ResidualLevel::F4: return "f4";
    case ResidualLevel::Teacher: return "teacher";
  }
  return "?";
}

inline ResidualLevel parse_residual_level(const std::string& s) {
  if (s == "f2") return ResidualLevel::F2;
  if (s == "f3") return ResidualLevel::F3;
  if (s == "f4") return ResidualLevel::F4;
  if (s == "teacher") return ResidualLevel::Teacher;
  throw InvalidArgument("unknown residual level '" + s + "'");
}

inline const FeatureMap& level_of(const MultiScaleFeatures& f, ResidualLevel l) {
  switch (l) {
    case ResidualLevel::F2: return f.f2;
    case ResidualLevel::F3: return f.f3;
    case ResidualLevel::F4: return f.f4;
    case ResidualLevel::Teacher: return f.teacher;
  }
  return f.teacher;
}

struct LocalizeOptions {
  ResidualLevel level = ResidualLevel::F2;
  int grid = kDefaultThresholdGrid;
  double default_threshold = 0.05;       // used when no ground truth is given
  double degenerate_residual = 1e-9;     // max Q at or below this: nothing to localize
};

struct LocalizationResult {
  std::string query_id;
  std::string retrieved_id;
  std::string expected_id;
  bool retrieval_miss = false;
  bool degenerate = false;
  bool scored = false;
  AffineTransform transform;
  FeatureMap residual;
  BinaryMask mask;   // at the retrieved image's resolution
  double threshold = 0.0;
  double f1 = 0.0;
  double mcc = 0.0;
  double mcc_threshold = 0.0;
};

// Compares the query, warped into the original's frame, with the original.
// `gt` is in the query frame. Fills transform, residual, mask and scores.
inline void compare_with_original(const Raster& query, const Raster& original, const AffineTransform& t,
                                  const BinaryMask* gt, const LocalizeOptions& opt, LocalizationResult& r) {
  r.transform = t;
  const auto warped = warp_image(query, t, original.width, original.height);
  const auto fq = filter_bank_features(warped.image);
  const auto fd = filter_bank_features(original);
  const FeatureMap& lq = level_of(fq, opt.level);
  const FeatureMap& ld = level_of(fd, opt.level);
  const auto cells = cell_validity(warped.valid, lq.width(), lq.height(), lq.stride());
  r.residual = residual_map(lq, ld, &cells);
  const auto up = upsample_residual(r.residual, original.width, original.height);
  const double qmax = up.empty() ? 0.0 : *std::max_element(up.begin(), up.end());
  if (qmax <= opt.degenerate_residual) {
    // Nothing to localize. Against a ground truth this is a miss, not a skip.
    r.degenerate = true;
    r.mask = BinaryMask(original.width, original.height);
    r.scored = gt != nullptr;
    return;
  }
  if (gt) {
    require(gt->width == query.width && gt->height == query.height, "localize: gt mask dimension mismatch");
    const BinaryMask gt_d = (t.is_identity() && query.width == original.width && query.height == original.height)
                                ? *gt
                                : warp_mask(*gt, t, original.width, original.height);
    const auto grid = quantile_grid(up, opt.grid, &warped.valid);
    const auto sweep = optimal_threshold(up, gt_d, grid, &warped.valid);
    r.threshold = sweep.f1_threshold;
    r.f1 = sweep.f1;
    r.mcc = sweep.mcc;
    r.mcc_threshold = sweep.mcc_threshold;
    r.scored = true;
  } else {
    r.threshold = opt.default_threshold;
  }
  r.mask = threshold_values(up, r.threshold, original.width, original.height, &warped.valid);
}

// Full pipeline for one query: top-1 search, best pair, transform, warp,
// residual, threshold. `load_original` fetches the raster of an indexed
// image. A top-1 different from `expected_id` (when given) is flagged as a
// retrieval miss and left unscored.
inline LocalizationResult localize(const std::string& query_id, const Raster& query,
                                   std::span<const ObjectEmbedding> query_embeddings, const ObjectIndex& index,
                                   const std::function<Raster(const std::string&)>& load_original,
                                   const BinaryMask* gt, const std::string& expected_id,
                                   const LocalizeOptions& opt = {}) {
  const auto hits = index.search(query_embeddings, 1);
  if (hits.empty()) throw Error("localize: retrieval returned no results");
  const auto& top = hits.front();
  LocalizationResult r;
  r.query_id = query_id;
  r.retrieved_id = top.image_id;
  r.expected_id = expected_id;
  const IndexedImage* img = index.find(top.image_id);
  const Box& box_q = query_embeddings[top.query_index].box;
  const Box& box_d = img->boxes[top.database_index];
  r.transform = estimate_transform(box_q, box_d);
  if (!expected_id.empty() && top.image_id != expected_id) {
    r.retrieval_miss = true;
    return r;
  }
  compare_with_original(query, load_original(top.image_id), r.transform, gt, opt, r);
  return r;
}

}  // namespace sir
