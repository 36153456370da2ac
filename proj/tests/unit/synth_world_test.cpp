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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sir/detection.hpp"
#include "sir/features.hpp"
#include "sir/oetf.hpp"
#include "sir/raster.hpp"
#include "sir/scene.hpp"
#include "sir/splice.hpp"

namespace sir {
namespace {

TEST(OetfTest, RoundTripBothDtypes) {
  const auto f = oetf::from_f32({2, 3}, {1, 2, 3, 4, 5, -6.5f});
  std::stringstream ss;
  oetf::write(ss, f);
  const auto g = oetf::read(ss);
  EXPECT_EQ(g.dims, f.dims);
  EXPECT_EQ(g.f32, f.f32);

  const auto u = oetf::from_u8({4}, {0, 7, 255, 3});
  std::stringstream su;
  oetf::write(su, u);
  const auto v = oetf::read(su);
  EXPECT_EQ(v.dtype, oetf::DType::U8);
  EXPECT_EQ(v.u8, u.u8);
}

TEST(OetfTest, HeaderLayout) {
  std::stringstream ss;
  oetf::write(ss, oetf::from_f32({1}, {1.f}));
  const std::string b = ss.str();
  ASSERT_EQ(b.size(), 4u + 2 + 1 + 1 + 8 + 4);
  EXPECT_EQ(b.substr(0, 4), "OETF");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 0);  // f32
  EXPECT_EQ(b[7], 1);  // rank
}

TEST(OetfTest, CorruptInputs) {
  std::stringstream ss;
  oetf::write(ss, oetf::from_f32({2, 2}, {1, 2, 3, 4}));
  std::string b = ss.str();
  std::string bad = b;
  bad[0] = 'X';
  std::stringstream s1(bad);
  EXPECT_THROW(oetf::read(s1), FormatError);
  std::string ver = b;
  ver[4] = 9;
  std::stringstream s2(ver);
  EXPECT_THROW(oetf::read(s2), FormatError);
  std::stringstream s3(b.substr(0, b.size() - 3));
  EXPECT_THROW(oetf::read(s3), FormatError);
  std::stringstream s4(b.substr(0, 10));
  EXPECT_THROW(oetf::read(s4), FormatError);
}

TEST(SceneTest, Deterministic) {
  SceneParams p;
  const auto a = generate_scene(42, p), b = generate_scene(42, p), c = generate_scene(43, p);
  EXPECT_EQ(a.image, b.image);
  EXPECT_NE(a.image, c.image);
}

TEST(SceneTest, ZeroObjectsIsBackgroundOnly) {
  SceneParams p;
  p.num_objects = 0;
  const auto s = generate_scene(1, p);
  EXPECT_TRUE(s.objects.empty());
  EXPECT_EQ(s.image.width, 128);
}

TEST(SceneTest, MasksInsideBoxesOnManySeeds) {
  SceneParams p;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(seed, p);
    ASSERT_EQ(static_cast<int>(s.objects.size()), p.num_objects);
    for (const auto& o : s.objects) {
      const Box& b = o.detection.box;
      EXPECT_GE(b.x1, 0.f);
      EXPECT_GE(b.y1, 0.f);
      EXPECT_LE(b.x2, 128.f);
      EXPECT_LE(b.y2, 128.f);
      ASSERT_GT(o.mask.count(), 0u);
      for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
          if (!o.mask.at(y, x)) continue;
          EXPECT_TRUE(x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2) << "seed " << seed;
        }
    }
  }
}

TEST(SceneTest, ParameterErrors) {
  SceneParams p;
  p.width = 32;
  EXPECT_THROW(generate_scene(1, p), InvalidArgument);
  p = {};
  p.num_objects = 17;
  EXPECT_THROW(generate_scene(1, p), InvalidArgument);
  p = {};
  p.num_objects = 16;
  p.min_object_size = p.max_object_size = 60;
  EXPECT_THROW(generate_scene(1, p), Error);  // cannot place them all
}

TEST(SpliceTest, SelfSpliceIsIdentity) {
  const auto s = generate_scene(5, SceneParams{});
  const auto pair = splice(s, s, 0, Placement{});
  EXPECT_EQ(pair.spliced, s.image);
  EXPECT_EQ(pair.gt_mask, s.objects[0].mask);
}

TEST(SpliceTest, OutsideMaskMatchesTargetAndInsideMatchesSource) {
  SceneParams p;
  const auto src = generate_scene(7, p), dst = generate_scene(8, p);
  const Box b = src.objects[1].detection.box;
  const Placement pl{1.0, 60.0 - b.x1, 50.0 - b.y1};
  if (place_box(b, pl).x2 > 128 || place_box(b, pl).y2 > 128) GTEST_SKIP();
  const auto pair = splice(src, dst, 1, pl);
  std::size_t differing = 0;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const bool in = pair.gt_mask.at(y, x);
      const bool same = pair.spliced.same_pixel(dst.image, y, x);
      if (!in) {
        EXPECT_TRUE(same);
      }
      if (in) {
        const int sx = static_cast<int>(std::floor(x + 0.5 - pl.tx));
        const int sy = static_cast<int>(std::floor(y + 0.5 - pl.ty));
        EXPECT_TRUE(std::equal(pair.spliced.px(y, x), pair.spliced.px(y, x) + 3, src.image.px(sy, sx)));
      }
      differing += !same;
    }
  EXPECT_GT(differing, pair.gt_mask.count() / 2);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      if (!pair.gt_mask.at(y, x)) continue;
      EXPECT_TRUE(x >= pair.spliced_box.x1 && x < pair.spliced_box.x2 && y >= pair.spliced_box.y1 &&
                  y < pair.spliced_box.y2);
    }
}

TEST(SpliceTest, ScaleTwoQuadruplesArea) {
  SceneParams p;
  p.min_object_size = 20;
  p.max_object_size = 28;
  const auto src = generate_scene(11, p), dst = generate_scene(12, p);
  const Box b = src.objects[0].detection.box;
  const Placement pl{2.0, 4.0 - 2.0 * b.x1, 4.0 - 2.0 * b.y1};
  const auto pair = splice(src, dst, 0, pl);
  const double ratio = double(pair.gt_mask.count()) / double(src.objects[0].mask.count());
  EXPECT_NEAR(ratio, 4.0, 0.2);
}

TEST(SpliceTest, OutOfBoundsPlacementRejected) {
  const auto s = generate_scene(13, SceneParams{});
  EXPECT_THROW(splice(s, s, 0, Placement{1.0, 500.0, 0.0}), InvalidArgument);
  EXPECT_THROW(splice(s, s, 9, Placement{}), InvalidArgument);
}

TEST(DetectionTest, ZeroJitterIsExact) {
  const auto s = generate_scene(21, SceneParams{});
  const auto d = detection_oracle(s, 0.0, 5);
  ASSERT_EQ(d.size(), s.objects.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(d[i].box, s.objects[i].detection.box);
    EXPECT_GE(d[i].score, 0.5f);
    EXPECT_LE(d[i].score, 1.f);
  }
}

TEST(DetectionTest, JitterReproducibleAndClipped) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_scene(seed, SceneParams{});
    const auto a = detection_oracle(s, 0.1, seed), b = detection_oracle(s, 0.1, seed);
    EXPECT_EQ(a, b);
    for (const auto& d : a) {
      EXPECT_TRUE(d.box.valid());
      EXPECT_GE(d.box.x1, 0.f);
      EXPECT_GE(d.box.y1, 0.f);
      EXPECT_LE(d.box.x2, 128.f);
      EXPECT_LE(d.box.y2, 128.f);
    }
  }
}

TEST(DetectionTest, DropAndSpuriousKnobs) {
  const auto s = generate_scene(3, SceneParams{});
  OracleOptions all_drop{0.0, 1, 1.0, 0.0};
  EXPECT_TRUE(detection_oracle(s, all_drop).empty());
  OracleOptions extra{0.0, 1, 0.0, 3.0};
  std::size_t spurious = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    extra.seed = seed;
    for (const auto& d : detection_oracle(s, extra)) spurious += d.class_id == kSpuriousClass;
  }
  EXPECT_GT(spurious, 20u);
}

TEST(FeaturesTest, ShapesAndStrides) {
  const auto f = filter_bank_features(generate_scene(1, SceneParams{}).image);
  EXPECT_EQ(f.f2.width(), 32);
  EXPECT_EQ(f.f2.channels(), 16);
  EXPECT_EQ(f.f3.width(), 16);
  EXPECT_EQ(f.f3.channels(), 32);
  EXPECT_EQ(f.f4.width(), 8);
  EXPECT_EQ(f.f4.channels(), 64);
  EXPECT_EQ(f.teacher.width(), 8);
  EXPECT_EQ(f.teacher.height(), 8);
  EXPECT_EQ(f.teacher.channels(), 64);
  EXPECT_FLOAT_EQ(f.teacher.stride(), 16.f);
  EXPECT_THROW(filter_bank_features(Raster(32, 128)), InvalidArgument);
}

TEST(FeaturesTest, ConstantImages) {
  Raster gray(128, 128);
  std::fill(gray.pixels.begin(), gray.pixels.end(), 128);
  const auto g = filter_bank_features(gray);
  for (float v : g.f2.data()) EXPECT_EQ(v, 0.f);
  for (float v : g.teacher.data()) EXPECT_EQ(v, 0.f);

  Raster red(128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) red.px(y, x)[0] = 200;
  const auto r = filter_bank_features(red);
  // A flat color field has no spatial structure: every f2 cell is identical.
  for (int y = 0; y < r.f2.height(); ++y)
    for (int x = 0; x < r.f2.width(); ++x)
      for (int c = 0; c < 16; ++c) EXPECT_EQ(r.f2.cell(y, x)[c], r.f2.cell(0, 0)[c]);
}

TEST(FeaturesTest, ShiftBySixteenPixelsShiftsTeacherByOneCell) {
  const auto s = generate_scene(77, SceneParams{});
  Raster shifted(128, 128);
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) {
      const int sx = (x - 16 + 128) % 128;
      std::copy_n(s.image.px(y, sx), 3, shifted.px(y, x));
    }
  const auto a = filter_bank_features(s.image), b = filter_bank_features(shifted);
  double worst = 0;
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 6; ++x)
      for (int c = 0; c < 64; ++c)
        worst = std::max(worst, std::abs(double(b.teacher.cell(y, x + 1)[c]) - a.teacher.cell(y, x)[c]));
  EXPECT_LT(worst, 1e-3);
}

TEST(FeaturesTest, Deterministic) {
  const auto img = generate_scene(5, SceneParams{}).image;
  EXPECT_EQ(filter_bank_features(img).teacher.data(), filter_bank_features(img).teacher.data());
}

}  // namespace
}  // namespace sir
