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

#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "oracles.hpp"
#include "sir/detection.hpp"
#include "sir/index.hpp"
#include "sir/localize.hpp"
#include "sir/pipeline.hpp"
#include "sir/scene.hpp"
#include "sir/splice.hpp"

namespace sir {
namespace {

Raster smooth_raster(int w, int h) {
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto* p = r.px(y, x);
      p[0] = static_cast<std::uint8_t>(128 + 60 * std::sin(x / 9.0));
      p[1] = static_cast<std::uint8_t>(128 + 60 * std::cos(y / 11.0));
      p[2] = static_cast<std::uint8_t>((x + y) / 2);
    }
  return r;
}

BinaryMask mask_from(int w, int h, std::vector<std::uint8_t> bits) {
  BinaryMask m(w, h);
  m.bits = std::move(bits);
  return m;
}

TEST(TransformTest, MapsBoxOntoBox) {
  const Box q{10, 20, 30, 60}, d{5, 0, 45, 20};
  const auto t = estimate_transform(q, d);
  EXPECT_EQ(t.apply(q), d);
  EXPECT_DOUBLE_EQ(t.sx, 2.0);
  EXPECT_DOUBLE_EQ(t.sy, 0.5);
  EXPECT_TRUE(estimate_transform(q, q).is_identity());
  EXPECT_THROW(estimate_transform(Box{0, 0, 0, 5}, d), InvalidArgument);
  const auto inv = t.inverse();
  EXPECT_NEAR(inv.apply_x(t.apply_x(17.0)), 17.0, 1e-12);
  EXPECT_NEAR(inv.apply_y(t.apply_y(-3.0)), -3.0, 1e-12);
}

TEST(WarpTest, IdentityCopies) {
  const auto r = smooth_raster(40, 30);
  const auto w = warp_image(r, AffineTransform{}, 40, 30);
  EXPECT_EQ(w.image, r);
  EXPECT_EQ(w.valid.count(), 40u * 30u);
}

TEST(WarpTest, IntegerTranslationLeavesInvalidStrip) {
  const auto r = smooth_raster(40, 30);
  const auto w = warp_image(r, AffineTransform{1, 1, 10, 0}, 40, 30);
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 40; ++x) {
      EXPECT_EQ(w.valid.at(y, x) != 0, x >= 10);
      if (x >= 10) {
        EXPECT_TRUE(std::equal(w.image.px(y, x), w.image.px(y, x) + 3, r.px(y, x - 10)));
      }
    }
}

TEST(WarpTest, InverseCompositionRecoversImage) {
  const auto r = smooth_raster(48, 48);
  const AffineTransform t{2, 2, 0, 0};
  const auto up = warp_image(r, t, 96, 96);
  const auto back = warp_image(up.image, t.inverse(), 48, 48);
  int worst = 0;
  for (int y = 1; y < 47; ++y)
    for (int x = 1; x < 47; ++x)
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(back.image.px(y, x)[c] - r.px(y, x)[c]));
  EXPECT_LE(worst, 2);
}

TEST(WarpTest, MaskNearestNeighbour) {
  BinaryMask m(4, 4);
  m.at(1, 1) = 1;
  const auto w = warp_mask(m, AffineTransform{2, 2, 0, 0}, 8, 8);
  EXPECT_EQ(w.count(), 4u);
  EXPECT_TRUE(w.at(2, 2) && w.at(2, 3) && w.at(3, 2) && w.at(3, 3));
}

TEST(ResidualTest, HandCaseAndValidity) {
  FeatureMap a(2, 1, 2, 4.f), b(2, 1, 2, 4.f);
  a.at(0, 0, 0) = 1;
  b.at(0, 0, 1) = 1;
  a.at(0, 1, 0) = 3;
  b.at(0, 1, 0) = 3;
  const auto q = residual_map(a, b);
  EXPECT_FLOAT_EQ(q.at(0, 0, 0), 2.f);
  EXPECT_FLOAT_EQ(q.at(0, 1, 0), 0.f);
  BinaryMask valid(2, 1);
  valid.at(0, 1) = 1;
  EXPECT_FLOAT_EQ(residual_map(a, b, &valid).at(0, 0, 0), 0.f);
  EXPECT_THROW(residual_map(a, FeatureMap(2, 1, 3, 4.f)), InvalidArgument);
}

TEST(ResidualTest, ChannelPermutationInvariant) {
  Rng rng(1);
  FeatureMap a(3, 3, 5, 4.f), b(3, 3, 5, 4.f), pa(3, 3, 5, 4.f), pb(3, 3, 5, 4.f);
  const int perm[5] = {3, 0, 4, 1, 2};
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 5; ++c) {
        a.at(y, x, c) = float(rng.uniform());
        b.at(y, x, c) = float(rng.uniform());
      }
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 5; ++c) {
        pa.at(y, x, perm[c]) = a.at(y, x, c);
        pb.at(y, x, perm[c]) = b.at(y, x, c);
      }
  const auto q = residual_map(a, b), pq = residual_map(pa, pb);
  for (std::size_t i = 0; i < q.data().size(); ++i) EXPECT_NEAR(q.data()[i], pq.data()[i], 1e-6);
}

TEST(ThresholdTest, MonotoneInThreshold) {
  Rng rng(2);
  FeatureMap q(8, 8, 1, 4.f);
  for (auto& v : q.data()) v = float(rng.uniform());
  BinaryMask prev = threshold_mask(q, 0.0, 32, 32);
  for (double t = 0.1; t < 1.0; t += 0.1) {
    const auto m = threshold_mask(q, t, 32, 32);
    for (std::size_t i = 0; i < m.bits.size(); ++i) EXPECT_LE(m.bits[i], prev.bits[i]);
    prev = m;
  }
  EXPECT_THROW(threshold_mask(q, -0.1, 32, 32), InvalidArgument);
}

TEST(MaskScoreTest, HandCase) {
  const auto s = mask_scores(mask_from(2, 2, {1, 1, 0, 0}), mask_from(2, 2, {1, 0, 1, 0}));
  EXPECT_DOUBLE_EQ(s.f1, 0.5);
  EXPECT_DOUBLE_EQ(s.mcc, 0.0);
  const auto perfect = mask_scores(mask_from(2, 2, {1, 0, 0, 1}), mask_from(2, 2, {1, 0, 0, 1}));
  EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
  EXPECT_DOUBLE_EQ(perfect.mcc, 1.0);
  const auto empty = mask_scores(BinaryMask(2, 2), BinaryMask(2, 2));
  EXPECT_EQ(empty.f1, 0.0);
  EXPECT_EQ(empty.mcc, 0.0);
  EXPECT_THROW(mask_scores(BinaryMask(2, 2), BinaryMask(3, 2)), InvalidArgument);
}

TEST(MaskScoreTest, AgreesWithOracleOnRandomMasks) {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    const double p = rng.uniform(0.05, 0.6), g = rng.uniform(0.05, 0.6);
    BinaryMask pred(16, 12), gt(16, 12);
    for (auto& b : pred.bits) b = rng.bernoulli(p);
    for (auto& b : gt.bits) b = rng.bernoulli(g);
    const auto s = mask_scores(pred, gt);
    EXPECT_NEAR(s.f1, oracle::f1(oracle::count(pred.bits, gt.bits)), 1e-12);
    EXPECT_NEAR(s.mcc, oracle::mcc(pred.bits, gt.bits), 1e-12);
  }
}

TEST(OptimalThresholdTest, BeatsEveryGridThreshold) {
  Rng rng(4);
  std::vector<double> values(400);
  BinaryMask gt(20, 20);
  for (std::size_t i = 0; i < values.size(); ++i) {
    gt.bits[i] = rng.bernoulli(0.3);
    values[i] = rng.uniform() + (gt.bits[i] ? 0.4 : 0.0);
  }
  const auto grid = quantile_grid(values, 32);
  EXPECT_TRUE(std::is_sorted(grid.begin(), grid.end()));
  const auto best = optimal_threshold(values, gt, grid);
  for (double t : grid) {
    const auto s = mask_scores(threshold_values(values, t, 20, 20), gt);
    EXPECT_GE(best.f1, s.f1);
    EXPECT_GE(best.mcc, s.mcc);
  }
  EXPECT_GT(best.f1, 0.5);
}

TEST(QuantileGridTest, EndpointsAndValidity) {
  const std::vector<double> v = {5, 1, 3, 2, 4};
  const auto g = quantile_grid(v, 5);
  EXPECT_EQ(g, (std::vector<double>{1, 2, 3, 4, 5}));
  BinaryMask valid(5, 1);
  valid.at(0, 0) = 1;
  EXPECT_EQ(quantile_grid(v, 4, &valid), (std::vector<double>{5}));
  EXPECT_THROW(quantile_grid(v, 0), InvalidArgument);
}

TEST(LevelTest, Names) {
  for (auto l : {ResidualLevel::F2, ResidualLevel::F3, ResidualLevel::F4, ResidualLevel::Teacher})
    EXPECT_EQ(parse_residual_level(to_string(l)), l);
  EXPECT_THROW(parse_residual_level("f5"), InvalidArgument);
}

TEST(CompareTest, IdenticalImagesAreDegenerate) {
  const auto s = generate_scene(4, SceneParams{});
  LocalizationResult r;
  compare_with_original(s.image, s.image, AffineTransform{}, &s.objects[0].mask, LocalizeOptions{}, r);
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(r.scored);
  EXPECT_EQ(r.f1, 0.0);
  EXPECT_EQ(r.mcc, 0.0);
  EXPECT_EQ(r.mask.count(), 0u);
  LocalizationResult blind;
  compare_with_original(s.image, s.image, AffineTransform{}, nullptr, LocalizeOptions{}, blind);
  EXPECT_FALSE(blind.scored);
}

struct SpliceWorld {
  Scene src, dst, other;
  SplicedPair pair;
  ObjectIndex index = ObjectIndex::exact(kTeacherChannels);
  Extractor ex{[] {
    PipelineConfig c;
    c.whitening = false;
    return c;
  }()};
  std::map<std::string, Raster> originals;

  SpliceWorld() {
    SceneParams p;
    src = generate_scene(101, p);
    dst = generate_scene(202, p);
    other = generate_scene(303, p);
    const Box b = src.objects[0].detection.box;
    // Drop the object into the corner opposite the host's objects.
    const double tx = (dst.objects[0].detection.box.x1 < 64 ? 124.0 - b.x2 : 4.0 - b.x1);
    const double ty = (dst.objects[0].detection.box.y1 < 64 ? 124.0 - b.y2 : 4.0 - b.y1);
    pair = splice(src, dst, 0, Placement{1.0, tx, ty});
    for (const Scene* s : {&src, &dst, &other}) {
      index.add_image(s->id, ex.embed(s->id, s->image, detection_oracle(*s, 0.0, 1)));
      originals[s->id] = s->image;
    }
    index.freeze();
  }
};

TEST(LocalizeTest, SplicedRegionFound) {
  SpliceWorld w;
  const auto q = w.ex.embed("q", w.pair.spliced, detection_oracle(w.pair, 0.0, 1));
  const auto loader = [&](const std::string& id) { return w.originals.at(id); };
  const auto r = localize("q", w.pair.spliced, q, w.index, loader, &w.pair.gt_mask, w.dst.id);
  EXPECT_FALSE(r.retrieval_miss);
  EXPECT_EQ(r.retrieved_id, w.dst.id);
  ASSERT_TRUE(r.scored);
  EXPECT_GT(r.f1, 0.6);
  EXPECT_GT(r.mcc, 0.6);
  EXPECT_EQ(r.mask.width, 128);
}

TEST(LocalizeTest, WrongExpectedIdIsRetrievalMiss) {
  SpliceWorld w;
  const auto q = w.ex.embed("q", w.pair.spliced, detection_oracle(w.pair, 0.0, 1));
  bool loaded = false;
  const auto loader = [&](const std::string& id) {
    loaded = true;
    return w.originals.at(id);
  };
  const auto r = localize("q", w.pair.spliced, q, w.index, loader, &w.pair.gt_mask, "not-there");
  EXPECT_TRUE(r.retrieval_miss);
  EXPECT_FALSE(r.scored);
  EXPECT_FALSE(loaded);
}

}  // namespace
}  // namespace sir
