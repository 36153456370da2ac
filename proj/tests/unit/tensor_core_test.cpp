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
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sir/hog.hpp"
#include "sir/pooling.hpp"
#include "sir/roi_align.hpp"
#include "sir/whitening.hpp"

namespace sir {
namespace {

FeatureMap random_map(std::mt19937_64& gen, int w, int h, int c, float stride, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureMap fm(w, h, c, stride);
  for (auto& v : fm.data()) v = static_cast<float>(u(gen));
  return fm;
}

TEST(FeatureMapTest, RejectsBadShapes) {
  EXPECT_THROW(FeatureMap(0, 1, 1, 1.f), InvalidArgument);
  EXPECT_THROW(FeatureMap(1, 1, 1, 0.f), InvalidArgument);
  EXPECT_THROW(FeatureMap(2, 2, 1, 1.f, std::vector<float>(3)), InvalidArgument);
}

TEST(DescriptorTest, NormalizationAndZeroNorm) {
  const std::vector<double> v{3, 4};
  const auto d = l2_normalized(std::span<const double>(v));
  EXPECT_TRUE(d.normalized);
  EXPECT_FLOAT_EQ(d.values[0], 0.6f);
  EXPECT_FLOAT_EQ(d.values[1], 0.8f);
  const std::vector<double> z{0, 0};
  EXPECT_THROW(l2_normalized(std::span<const double>(z)), ZeroNormError);
}

TEST(RoiAlignTest, ConstantMapGivesConstant) {
  FeatureMap fm(9, 7, 2, 4.f);
  for (auto& v : fm.data()) v = 5.f;
  const auto r = roi_align(fm, Box{3.f, 2.f, 29.f, 21.f}, 7, 2);
  for (float v : r.data()) EXPECT_FLOAT_EQ(v, 5.f);
}

TEST(RoiAlignTest, TwoByTwoHandCase) {
  const FeatureMap fm(2, 2, 1, 1.f, {1, 2, 3, 4});
  const auto r = roi_align(fm, Box{0, 0, 2, 2}, 1, 1);
  EXPECT_NEAR(r.data()[0], 2.5, 1e-7);
}

TEST(RoiAlignTest, MatchesOracleWithRatioFour) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 100; ++t) {
    const int w = 3 + t % 9, h = 2 + t % 7, c = 1 + t % 3;
    const float stride = (t % 3 == 0) ? 1.f : (t % 3 == 1 ? 4.f : 16.f);
    const auto fm = random_map(gen, w, h, c, stride);
    double x1 = u(gen) * w * stride * 0.8, y1 = u(gen) * h * stride * 0.8;
    double x2 = x1 + 0.5 + u(gen) * w * stride, y2 = y1 + 0.5 + u(gen) * h * stride;
    const Box box{float(x1), float(y1), float(x2), float(y2)};
    const auto got = roi_align(fm, box, 3, 4);
    const auto want = oracle::roi_align(fm.data(), w, h, c, stride, box.x1, box.y1, box.x2, box.y2, 3, 4);
    ASSERT_EQ(got.data().size(), want.size());
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-6);
  }
}

TEST(RoiAlignTest, LinearInTheMap) {
  std::mt19937_64 gen(5);
  const auto a = random_map(gen, 8, 6, 3, 4.f), b = random_map(gen, 8, 6, 3, 4.f);
  FeatureMap mix(8, 6, 3, 4.f);
  for (std::size_t i = 0; i < mix.data().size(); ++i) mix.data()[i] = 2.f * a.data()[i] - 0.5f * b.data()[i];
  const Box box{2.5f, 1.f, 27.f, 19.f};
  const auto ra = roi_align(a, box), rb = roi_align(b, box), rm = roi_align(mix, box);
  for (std::size_t i = 0; i < rm.data().size(); ++i) {
    EXPECT_NEAR(rm.data()[i], 2.0 * ra.data()[i] - 0.5 * rb.data()[i], 1e-5);
  }
}

TEST(RoiAlignTest, RejectsDegenerateInput) {
  FeatureMap fm(4, 4, 1, 4.f);
  EXPECT_THROW(roi_align(fm, Box{100, 100, 120, 120}), InvalidArgument);  // outside after clipping
  EXPECT_THROW(roi_align(fm, Box{5, 5, 5, 9}), InvalidArgument);
  EXPECT_THROW(roi_align(fm, Box{0, 0, 8, 8}, 0, 2), InvalidArgument);
  EXPECT_THROW(roi_align(fm, Box{0, 0, 8, 8}, 2, 0), InvalidArgument);
}

TEST(ObjectPoolingTest, HandCaseAndZeroRoi) {
  FeatureMap roi(7, 7, 2, 1.f);
  EXPECT_THROW(pool_object_embedding(roi), ZeroNormError);
  for (int y = 0; y < 7; ++y)
    for (int x = 0; x < 7; ++x) {
      roi.cell(y, x)[0] = 3.f;
      roi.cell(y, x)[1] = 4.f;
    }
  const auto d = pool_object_embedding(roi);
  EXPECT_NEAR(d.values[0], 0.6, 1e-7);
  EXPECT_NEAR(d.values[1], 0.8, 1e-7);
}

TEST(ObjectPoolingTest, SpatialPermutationInvariant) {
  std::mt19937_64 gen(9);
  const auto roi = random_map(gen, 7, 7, 5, 1.f, 0.0, 1.0);
  std::vector<int> perm(49);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  FeatureMap shuffled(7, 7, 5, 1.f);
  for (int i = 0; i < 49; ++i) {
    for (int c = 0; c < 5; ++c) shuffled.cell(i / 7, i % 7)[c] = roi.cell(perm[i] / 7, perm[i] % 7)[c];
  }
  EXPECT_EQ(pool_object_embedding(roi).values, pool_object_embedding(shuffled).values);
}

TEST(GlobalPoolingTest, GemOneEqualsSpoc) {
  std::mt19937_64 gen(11);
  for (int t = 0; t < 20; ++t) {
    const auto fm = random_map(gen, 5, 4, 3, 16.f, 0.01, 2.0);
    const auto spoc = pool_global_raw(fm, {GlobalMethod::Spoc});
    const auto gem = pool_global_raw(fm, {GlobalMethod::Gem, 1.0});
    for (std::size_t c = 0; c < spoc.size(); ++c) EXPECT_NEAR(gem[c], spoc[c], 1e-12);
  }
}

TEST(GlobalPoolingTest, GemHandCase) {
  const FeatureMap fm(2, 1, 1, 1.f, {1, 3});
  EXPECT_NEAR(pool_global_raw(fm, {GlobalMethod::Gem, 2.0})[0], std::sqrt(5.0), 1e-12);
}

TEST(GlobalPoolingTest, LargeGemApproachesMac) {
  // p = 100 is within 2% of the max only when few cells compete for it; on
  // a 2x2 map the gap is at most 1 - 4^(-1/100) < 1.4%.
  std::mt19937_64 gen(13);
  for (int t = 0; t < 50; ++t) {
    const auto fm = random_map(gen, 2, 2, 4, 16.f, 0.1, 1.0);
    const auto mac = pool_global_raw(fm, {GlobalMethod::Mac});
    const auto gem = pool_global_raw(fm, {GlobalMethod::Gem, 100.0});
    for (std::size_t c = 0; c < mac.size(); ++c) EXPECT_NEAR(gem[c] / mac[c], 1.0, 0.02);
  }
}

TEST(GlobalPoolingTest, AllZeroMapAndNorms) {
  FeatureMap zero(4, 4, 3, 16.f);
  for (auto m : {GlobalMethod::Mac, GlobalMethod::Spoc, GlobalMethod::Gem, GlobalMethod::Rmac}) {
    if (m == GlobalMethod::Gem) continue;  // the clamp keeps GeM away from zero
    EXPECT_THROW(pool_global(zero, {m}), ZeroNormError);
  }
  std::mt19937_64 gen(17);
  const auto fm = random_map(gen, 8, 8, 6, 16.f, 0.0, 1.0);
  for (auto m : {GlobalMethod::Mac, GlobalMethod::Spoc, GlobalMethod::Gem, GlobalMethod::Rmac}) {
    const auto d = pool_global(fm, {m});
    EXPECT_NEAR(std::sqrt(squared_norm(d.values)), 1.0, 1e-5);
  }
  EXPECT_THROW(pool_global(fm, {GlobalMethod::Gem, 0.5}), InvalidArgument);
}

TEST(GlobalPoolingTest, RmacRegionsCoverTheMap) {
  const auto regions = rmac_regions(8, 8, 3);
  ASSERT_FALSE(regions.empty());
  for (const auto& r : regions) {
    EXPECT_GE(r.x, 0);
    EXPECT_GE(r.y, 0);
    EXPECT_LE(r.x + r.size, 8);
    EXPECT_LE(r.y + r.size, 8);
  }
}

std::vector<Descriptor> gaussian_samples(std::mt19937_64& gen, int n, std::vector<double> sd) {
  std::normal_distribution<double> g(0, 1);
  std::vector<Descriptor> s(n);
  for (auto& d : s) {
    for (double v : sd) d.values.push_back(static_cast<float>(v * g(gen)));
  }
  return s;
}

TEST(WhiteningTest, DiagonalCovarianceBecomesIdentity) {
  std::mt19937_64 gen(19);
  auto s = gaussian_samples(gen, 4000, {2.0, 1.0});
  const auto t = fit_whitening(s, 2, 1e-9);
  double c00 = 0, c01 = 0, c11 = 0;
  std::vector<std::vector<double>> out;
  double m0 = 0, m1 = 0;
  for (const auto& d : s) {
    out.push_back(whiten_raw(t, d.values));
    m0 += out.back()[0];
    m1 += out.back()[1];
  }
  m0 /= s.size();
  m1 /= s.size();
  for (const auto& o : out) {
    c00 += (o[0] - m0) * (o[0] - m0);
    c01 += (o[0] - m0) * (o[1] - m1);
    c11 += (o[1] - m1) * (o[1] - m1);
  }
  EXPECT_NEAR(c00 / s.size(), 1.0, 1e-4);
  EXPECT_NEAR(c11 / s.size(), 1.0, 1e-4);
  EXPECT_NEAR(c01 / s.size(), 0.0, 1e-4);
}

TEST(WhiteningTest, DominantDirectionSurvives) {
  // Four points with covariance exactly diag(4, 1) and mean 0.
  const float a = 2.f * std::sqrt(2.f), b = std::sqrt(2.f);
  std::vector<Descriptor> s(4);
  s[0].values = {a, 0};
  s[1].values = {-a, 0};
  s[2].values = {0, b};
  s[3].values = {0, -b};
  const auto t = fit_whitening(s, 2);
  Descriptor in;
  in.values = {2.f, 0.f};
  const auto w = apply_whitening(t, in);
  EXPECT_NEAR(std::abs(w.values[0]), 1.0, 1e-6);
  EXPECT_NEAR(w.values[1], 0.0, 1e-6);
}

TEST(WhiteningTest, IdenticalSamplesAndMean) {
  std::vector<Descriptor> s(5);
  for (auto& d : s) d.values = {0.5f, -1.f, 2.f};
  const auto t = fit_whitening(s, 3);
  for (float v : t.projection) EXPECT_TRUE(std::isfinite(v));
  for (double v : whiten_raw(t, s[0].values)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(apply_whitening(t, s[0]), ZeroNormError);

  std::mt19937_64 gen(29);
  const auto g = gaussian_samples(gen, 50, {1, 2, 3});
  const auto t2 = fit_whitening(g, 3);
  for (double v : whiten_raw(t2, t2.mean)) EXPECT_NEAR(v, 0.0, 1e-6);
}

TEST(WhiteningTest, IdentityTransformAndErrors) {
  Descriptor v;
  v.values = {0.6f, 0.8f};
  EXPECT_EQ(apply_whitening(WhiteningTransform::identity(2), v).values, v.values);
  Descriptor three;
  three.values = {1, 2, 3};
  EXPECT_THROW(apply_whitening(WhiteningTransform::identity(2), three), InvalidArgument);
  std::vector<Descriptor> one(1, v);
  EXPECT_THROW(fit_whitening(one, 2), InvalidArgument);
  std::vector<Descriptor> two(2, v);
  EXPECT_THROW(fit_whitening(two, 3), InvalidArgument);
  two[1].values[0] = NAN;
  EXPECT_THROW(fit_whitening(two, 1), Error);
}

TEST(WhiteningTest, ReducedDimension) {
  std::mt19937_64 gen(31);
  const auto s = gaussian_samples(gen, 200, {3, 2, 1, 0.5});
  const auto t = fit_whitening(s, 2);
  EXPECT_EQ(t.dim_out, 2);
  EXPECT_EQ(apply_whitening(t, s[0]).dim(), 2);
}

GrayImage step_edge(int n) {
  GrayImage g(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = n / 2; x < n; ++x) g.at(y, x) = 1.f;
  return g;
}

TEST(HogTest, VerticalEdgeVotesForZeroDegrees) {
  const auto d = hog_descriptor(step_edge(16), 1, 8);
  ASSERT_EQ(d.dim(), 8);
  EXPECT_NEAR(d.values[0], 1.0, 1e-6);
  for (int b = 1; b < 8; ++b) EXPECT_NEAR(d.values[b], 0.0, 1e-6);
}

TEST(HogTest, RotationPermutesBins) {
  std::mt19937_64 gen(37);
  std::uniform_real_distribution<float> u(0, 1);
  GrayImage g(12, 12);
  for (auto& v : g.data) v = u(gen);
  GrayImage r(12, 12);  // rotated 90 degrees counter-clockwise
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) r.at(11 - x, y) = g.at(y, x);
  const int bins = 8;
  const auto a = hog_descriptor(g, 1, bins), b = hog_descriptor(r, 1, bins);
  // A 90 degree turn moves unsigned orientation by bins/2 bins.
  for (int k = 0; k < bins; ++k) EXPECT_NEAR(b.values[(k + bins / 2) % bins], a.values[k], 1e-5);
}

TEST(HogTest, DeterministicAndConstantPatchRejected) {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<float> u(0, 1);
  GrayImage g(32, 32);
  for (auto& v : g.data) v = u(gen);
  EXPECT_EQ(hog_descriptor(g, 4, 8).values, hog_descriptor(g, 4, 8).values);
  EXPECT_EQ(hog_descriptor(g, 4, 8).dim(), 128);
  EXPECT_THROW(hog_descriptor(GrayImage(8, 8, 0.3f), 2, 8), ZeroNormError);
  EXPECT_THROW(hog_descriptor(g, 4, 1), InvalidArgument);
  EXPECT_THROW(hog_descriptor(GrayImage(3, 3, 0.f), 4, 8), InvalidArgument);
}

}  // namespace
}  // namespace sir
