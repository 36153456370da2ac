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

#include "sir/benchmark.hpp"
#include "sir/dataset.hpp"
#include "sir/pipeline.hpp"

namespace sir {
namespace {

namespace fs = std::filesystem;

BenchmarkConfig small_config() {
  BenchmarkConfig c;
  c.data.database_size = 24;
  c.data.query_count = 8;
  c.methods = {"mac", "oe-teacher", "oe-student-S3"};
  c.pq_settings.m = 8;
  c.pq_settings.k = 16;
  c.pq_settings.iterations = 5;
  c.max_objects_sweep = {1, 4};
  c.train.iterations = 4;
  c.train.batch_size = 2;
  c.train_images = 6;
  c.localization_data.database_size = 6;
  c.localization_data.query_count = 4;
  return c;
}

TEST(MethodTest, ParseNames) {
  EXPECT_EQ(parse_method("oe-teacher").method, Method::OeTeacher);
  const auto s = parse_method("oe-student-S2");
  EXPECT_TRUE(s.needs_student());
  EXPECT_EQ(s.variant, Variant::S2);
  EXPECT_EQ(s.name(), "oe-student-S2");
  EXPECT_FALSE(parse_method("gem").object_level());
  EXPECT_THROW(parse_method("oe-student-S9"), InvalidArgument);
  EXPECT_THROW(parse_method("vlad"), InvalidArgument);
}

TEST(ExtractorTest, StudentMethodNeedsParameters) {
  PipelineConfig c;
  c.method = parse_method("oe-student-S1");
  EXPECT_THROW(Extractor{c}, InvalidArgument);
  EXPECT_THROW(Extractor(c, init_student<float>(Variant::S3, StudentShape{}, 1)), InvalidArgument);
  EXPECT_NO_THROW(Extractor(c, init_student<float>(Variant::S1, StudentShape{}, 1)));
}

TEST(ConfigTest, JsonRoundTrip) {
  auto c = small_config();
  c.localize.level = ResidualLevel::F3;
  c.whitening = {true};
  const auto j = config_json(c);
  const auto back = benchmark_config_from_json(j);
  EXPECT_EQ(config_json(back), j);
  EXPECT_EQ(back.localize.level, ResidualLevel::F3);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(benchmark_config_from_json({{"methds", {"mac"}}}), InvalidArgument);
  EXPECT_THROW(benchmark_config_from_json({{"data", {{"sed", 3}}}}), InvalidArgument);
  EXPECT_THROW(benchmark_config_from_json({{"methods", {"nope"}}}), InvalidArgument);
  EXPECT_THROW(benchmark_config_from_json({{"pq_k", 300}}), InvalidArgument);
  EXPECT_THROW(benchmark_config_from_json({{"train_iterations", "many"}}), InvalidArgument);
  EXPECT_THROW(benchmark_config_from_json({{"data", {{"kind", "other"}}}}), InvalidArgument);
  const auto c = benchmark_config_from_json({{"train_iterations", 7}});
  EXPECT_EQ(c.train.iterations, 7);
  EXPECT_EQ(c.methods.size(), 9u);
}

TEST(MetadataTest, PipelineRoundTrip) {
  PipelineConfig c;
  c.method = parse_method("oe-hog");
  c.max_objects = 3;
  const auto text = pipeline_metadata(c, PqSettings{}, {{"note", "x"}});
  const auto back = pipeline_from_metadata(text);
  EXPECT_EQ(back.method, c.method);
  EXPECT_EQ(back.max_objects, 3);
  EXPECT_EQ(nlohmann::json::parse(text).at("note"), "x");
}

TEST(DatasetTest, GenerationIsDeterministicAndWellFormed) {
  SyntheticConfig c;
  c.database_size = 12;
  c.query_count = 5;
  const auto a = generate_dataset(c), b = generate_dataset(c);
  ASSERT_EQ(a.database.size(), 12u);
  ASSERT_EQ(a.queries.size(), 5u);
  for (std::size_t i = 0; i < a.queries.size(); ++i) {
    const auto& q = a.queries[i];
    EXPECT_EQ(q.image, b.queries[i].image);
    EXPECT_EQ(q.detections, b.queries[i].detections);
    ASSERT_TRUE(q.gt_mask.has_value());
    EXPECT_GT(q.gt_mask->count(), 0u);
    ASSERT_NE(a.find(q.source_id), nullptr);
    EXPECT_EQ(a.find(q.source_id)->role, Role::Authentic);
    EXPECT_EQ(a.find(q.target_id), nullptr);  // the host is not indexed
  }
  c.kind = DatasetKind::Localization;
  const auto l = generate_dataset(c);
  for (const auto& q : l.queries) EXPECT_NE(l.find(q.target_id), nullptr);
}

TEST(DatasetTest, ManifestRoundTrip) {
  SyntheticConfig c;
  c.database_size = 4;
  c.query_count = 2;
  const auto ds = generate_dataset(c);
  const auto dir = fs::temp_directory_path() / "sir_ds_test";
  fs::remove_all(dir);
  const auto m = write_dataset(dir.string(), ds);
  const auto read = read_manifest((dir / "manifest.json").string());
  EXPECT_EQ(read, m);
  const auto back = load_dataset(read);
  ASSERT_EQ(back.database.size(), ds.database.size());
  ASSERT_EQ(back.queries.size(), ds.queries.size());
  for (std::size_t i = 0; i < ds.queries.size(); ++i) {
    EXPECT_EQ(back.queries[i].image, ds.queries[i].image);
    EXPECT_EQ(back.queries[i].detections, ds.queries[i].detections);
    EXPECT_EQ(back.queries[i].gt_mask->bits, ds.queries[i].gt_mask->bits);
    EXPECT_EQ(back.queries[i].source_id, ds.queries[i].source_id);
  }
  fs::remove_all(dir);
  EXPECT_THROW(parse_manifest(R"({"records":[{"id":"a","role":"other"}]})"), FormatError);
  EXPECT_THROW(parse_manifest("not json"), FormatError);
}

TEST(BenchmarkTest, ReportsAreByteIdentical) {
  const auto c = small_config();
  const auto a = run_benchmark(c), b = run_benchmark(c);
  EXPECT_EQ(report_csv(a), report_csv(b));
  EXPECT_EQ(report_json(a), report_json(b));
  // 3 methods x 2 whitening x {exact, pq}, then the sweep.
  EXPECT_EQ(a.retrieval.size(), 12u);
  EXPECT_EQ(a.sweep.size(), 2u);
  ASSERT_EQ(a.distill.size(), 1u);
  EXPECT_EQ(a.distill[0].variant, "S3");
  ASSERT_TRUE(a.localization.has_value());
  EXPECT_EQ(a.localization->queries, 4u);
  for (const auto& r : a.retrieval) {
    EXPECT_LE(r.r1, r.r10);
    EXPECT_LE(r.r10, r.r100);
  }
}

}  // namespace
}  // namespace sir
