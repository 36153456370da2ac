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

#include <filesystem>
#include <span>

#include "gradcheck.hpp"
#include "sir/features.hpp"
#include "sir/scene.hpp"
#include "sir/student.hpp"
#include "sir/train.hpp"

namespace sir {
namespace {

using testing_support::gradient_check;
using testing_support::tiny_problem;

const std::vector<MultiScaleFeatures>& small_dataset() {
  static const std::vector<MultiScaleFeatures> data = [] {
    std::vector<MultiScaleFeatures> out;
    SceneParams p;
    p.width = p.height = 64;
    p.min_object_size = 14;
    p.max_object_size = 24;
    p.box_margin = 4;
    for (std::uint64_t s = 0; s < 6; ++s) out.push_back(filter_bank_features(generate_scene(s, p).image));
    return out;
  }();
  return data;
}

TEST(StudentTest, OutputMatchesTeacherShape) {
  const auto f = filter_bank_features(generate_scene(1, SceneParams{}).image);
  for (auto v : {Variant::S1, Variant::S2, Variant::S3}) {
    const auto p = init_student<float>(v, StudentShape::of(f), 3);
    const auto out = student_forward(p, f);
    EXPECT_TRUE(out.same_shape(f.teacher)) << to_string(v);
  }
}

TEST(StudentTest, ZeroParametersGiveZeroOutput) {
  const auto f = filter_bank_features(generate_scene(2, SceneParams{}).image);
  const auto p = StudentParams<float>::zeros(Variant::S3, StudentShape::of(f));
  const auto out = student_forward(p, f);
  for (float v : out.data()) EXPECT_EQ(v, 0.f);
}

TEST(StudentTest, ZeroGuidanceReducesS3ToS2) {
  const auto f = filter_bank_features(generate_scene(3, SceneParams{}).image);
  const auto shape = StudentShape::of(f);
  const auto s2 = init_student<float>(Variant::S2, shape, 9);
  auto s3 = StudentParams<float>::zeros(Variant::S3, shape);
  const auto src = s2.tensors();
  auto dst = s3.tensors();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ASSERT_EQ(src[i].first, dst[i].first);
    *dst[i].second = *src[i].second;
  }
  EXPECT_EQ(student_forward(s2, f).data(), student_forward(s3, f).data());
}

TEST(StudentTest, VariantNames) {
  EXPECT_EQ(parse_variant("S2"), Variant::S2);
  EXPECT_EQ(to_string(Variant::S3), "S3");
  EXPECT_THROW(parse_variant("S4"), InvalidArgument);
}

TEST(StudentTest, ChannelMismatchRejected) {
  auto prob = tiny_problem(Variant::S3, 1);
  prob.inputs.f3 = nn::Tensor3<double>(4, 4, 5);
  EXPECT_THROW(student_forward(prob.params, prob.inputs), InvalidArgument);
}

TEST(StudentTest, GuidedVariantCostsNoMoreThanDeepOne) {
  const StudentShape shape;
  const auto s1 = StudentParams<float>::zeros(Variant::S1, shape);
  const auto s2 = StudentParams<float>::zeros(Variant::S2, shape);
  const auto s3 = StudentParams<float>::zeros(Variant::S3, shape);
  EXPECT_LT(student_multiply_adds(s2, 32, 32), student_multiply_adds(s1, 32, 32));
  EXPECT_LE(student_multiply_adds(s3, 32, 32), student_multiply_adds(s1, 32, 32));
  EXPECT_GT(student_multiply_adds(s3, 32, 32), student_multiply_adds(s2, 32, 32));
}

TEST(LossTest, HandCases) {
  nn::Tensor3<double> a(1, 1, 2), b(1, 1, 2);
  a.values = {1, 2};
  b.values = {3, 2};
  EXPECT_DOUBLE_EQ(distill_loss(a, b), 2.0);
  EXPECT_DOUBLE_EQ(distill_loss(b, a), 2.0);
  EXPECT_DOUBLE_EQ(distill_loss(a, a), 0.0);
  EXPECT_THROW(distill_loss(a, nn::Tensor3<double>(1, 2, 2)), InvalidArgument);
}

TEST(LossTest, NonNegativeAndSymmetricOnRandomMaps) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    nn::Tensor3<double> a(3, 3, 4), b(3, 3, 4);
    testing_support::fill_random(a, rng, -2, 2);
    testing_support::fill_random(b, rng, -2, 2);
    EXPECT_GE(distill_loss(a, b), 0.0);
    EXPECT_DOUBLE_EQ(distill_loss(a, b), distill_loss(b, a));
  }
}

class GradientTest : public ::testing::TestWithParam<Variant> {};

TEST_P(GradientTest, MatchesCentralDifferences) {
  const auto report = gradient_check(tiny_problem(GetParam(), 5));
  EXPECT_GT(report.checked, 200u);
  EXPECT_LT(report.skipped, report.checked / 10);
  EXPECT_LT(report.worst_relative, 1e-4);
}

INSTANTIATE_TEST_SUITE_P(Variants, GradientTest, ::testing::Values(Variant::S1, Variant::S2, Variant::S3),
                         [](const auto& info) { return to_string(info.param); });

TEST(GradientTest, VanishesWhenOutputEqualsTarget) {
  auto prob = tiny_problem(Variant::S3, 6);
  prob.target = student_forward(prob.params, prob.inputs);
  const auto g = student_backward(prob.params, prob.inputs, prob.target);
  EXPECT_EQ(g.loss, 0.0);
  for (const auto& [name, v] : g.grad.tensors())
    for (double x : *v) EXPECT_EQ(x, 0.0) << name;
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  std::vector<double> p{1.0, 1.0, 1.0};
  const std::vector<double> g{0.5, -3.0, 0.0};
  AdamState st;
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  adam_step(std::span<double>(p), std::span<const double>(g), st, cfg);
  EXPECT_NEAR(p[0], 0.9, 1e-6);
  EXPECT_NEAR(p[1], 1.1, 1e-6);
  EXPECT_EQ(p[2], 1.0);
  EXPECT_EQ(st.step, 1);
}

TEST(AdamTest, NonFiniteGradientLeavesParametersAlone) {
  std::vector<double> p{1.0, 2.0};
  const std::vector<double> g{0.1, std::nan("")};
  AdamState st;
  EXPECT_THROW(adam_step(std::span<double>(p), std::span<const double>(g), st, TrainConfig{}), NumericError);
  EXPECT_EQ(p, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(st.step, 0);
}

TEST(TrainTest, ConfigValidation) {
  TrainConfig c;
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  EXPECT_THROW(train_student(Variant::S1, {}, TrainConfig{}), InvalidArgument);
}

TEST(TrainTest, OneIterationGivesOneLoss) {
  TrainConfig c;
  c.iterations = 1;
  c.batch_size = 2;
  EXPECT_EQ(train_student(Variant::S2, small_dataset(), c).loss_curve.size(), 1u);
}

TEST(TrainTest, DeterministicAndDecreasing) {
  TrainConfig c;
  c.iterations = 60;
  c.batch_size = 3;
  c.learning_rate = 5e-3;
  const auto a = train_student(Variant::S3, small_dataset(), c);
  const auto b = train_student(Variant::S3, small_dataset(), c);
  EXPECT_EQ(a.loss_curve, b.loss_curve);
  const auto ta = a.params.tensors(), tb = b.params.tensors();
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i].second, *tb[i].second);
  double lead = 0, trail = 0;
  for (int i = 0; i < 10; ++i) {
    lead += a.loss_curve[i];
    trail += a.loss_curve[a.loss_curve.size() - 1 - i];
  }
  EXPECT_LT(trail, lead);
}

TEST(CheckpointTest, RoundTripIsExact) {
  const auto dir = std::filesystem::temp_directory_path() / "sir_ckpt_test";
  std::filesystem::remove_all(dir);
  const auto p = init_student<float>(Variant::S3, StudentShape{}, 12);
  save_checkpoint(dir.string(), p);
  const auto q = load_checkpoint(dir.string());
  EXPECT_EQ(q.variant, Variant::S3);
  EXPECT_EQ(q.shape, p.shape);
  const auto tp = p.tensors(), tq = q.tensors();
  ASSERT_EQ(tp.size(), tq.size());
  for (std::size_t i = 0; i < tp.size(); ++i) EXPECT_EQ(*tp[i].second, *tq[i].second);
  EXPECT_THROW(load_checkpoint((dir / "missing").string()), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace sir
