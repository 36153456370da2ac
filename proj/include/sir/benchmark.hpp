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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sir/dataset.hpp"
#include "sir/error.hpp"
#include "sir/index.hpp"
#include "sir/localize.hpp"
#include "sir/metrics.hpp"
#include "sir/pipeline.hpp"
#include "sir/pq.hpp"
#include "sir/train.hpp"

namespace sir {

struct PqSettings {
  int m = kDefaultPqSubspaces;
  int k = kDefaultPqCentroids;
  int iterations = 25;
  std::uint64_t seed = 11;
};

using EmbeddingSets = std::vector<std::vector<ObjectEmbedding>>;

inline EmbeddingSets embed_images(const Extractor& ex, const std::vector<DatasetImage>& images) {
  EmbeddingSets out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(ex.embed(img.id, img.image, img.detections));
  return out;
}

inline std::vector<ObjectEmbedding> flatten(const EmbeddingSets& sets) {
  std::vector<ObjectEmbedding> all;
  for (const auto& s : sets) all.insert(all.end(), s.begin(), s.end());
  return all;
}

inline std::string pipeline_metadata(const PipelineConfig& cfg, const std::optional<PqSettings>& pq,
                                     const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j{{"method", cfg.method.name()},
                   {"max_objects", cfg.max_objects},
                   {"whitening", cfg.whitening},
                   {"roi_size", cfg.roi_size},
                   {"sampling_ratio", cfg.sampling_ratio}};
  if (pq) j["pq"] = {{"m", pq->m}, {"k", pq->k}, {"iterations", pq->iterations}, {"seed", pq->seed}};
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j.dump();
}

// Pipeline settings recorded by pipeline_metadata. Whitening itself lives
// in the index, so the returned config has it off.
inline PipelineConfig pipeline_from_metadata(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("index metadata: ") + e.what());
  }
  require(j.is_object() && j.contains("method"), "index metadata: missing method");
  PipelineConfig pc;
  pc.method = parse_method(j.at("method").get<std::string>());
  pc.max_objects = j.value("max_objects", pc.max_objects);
  pc.roi_size = j.value("roi_size", pc.roi_size);
  pc.sampling_ratio = j.value("sampling_ratio", pc.sampling_ratio);
  pc.whitening = false;
  pc.validate();
  return pc;
}

// Builds a frozen index from raw database embeddings. With whitening on,
// the transform is fitted on those embeddings, applied to them and stored
// in the index; with `pq`, a codebook is trained on the (whitened) set.
inline ObjectIndex build_index(const PipelineConfig& cfg, EmbeddingSets db, const std::vector<std::string>& ids,
                               const std::optional<PqSettings>& pq = std::nullopt,
                               std::optional<WhiteningTransform> whitening = std::nullopt,
                               const nlohmann::json& extra_metadata = nlohmann::json::object()) {
  require(db.size() == ids.size() && !db.empty(), "build_index: ids and embedding sets disagree");
  if (cfg.whitening && !whitening) whitening = fit_whitening(flatten(db), cfg);
  if (whitening) {
    for (auto& set : db) whiten_all(*whitening, set);
  }
  const int dim = db.front().front().vector.dim();
  ObjectIndex index = ObjectIndex::exact(dim, cfg.max_objects);
  if (pq) {
    std::vector<Descriptor> samples;
    for (const auto& set : db) {
      for (const auto& e : set) samples.push_back(e.vector);
    }
    index = ObjectIndex::quantized(train_pq(samples, pq->m, pq->k, pq->iterations, pq->seed), cfg.max_objects);
  }
  if (whitening) index.set_whitening(*whitening);
  index.set_metadata(pipeline_metadata(cfg, pq, extra_metadata));
  for (std::size_t i = 0; i < db.size(); ++i) index.add_image(ids[i], db[i]);
  index.freeze();
  return index;
}

// Applies the index's whitening (if any) to a query's raw embeddings.
inline std::vector<ObjectEmbedding> prepare_query(const ObjectIndex& index, std::vector<ObjectEmbedding> q) {
  if (index.whitening()) whiten_all(*index.whitening(), q);
  return q;
}

inline std::vector<RankedList> rank_queries(const ObjectIndex& index, const EmbeddingSets& queries,
                                            const std::vector<std::string>& ids, int topk, unsigned threads = 1) {
  std::vector<RankedList> lists;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    lists.push_back(RankedList::from_hits(ids[i], index.search(prepare_query(index, queries[i]), topk, threads)));
  }
  return lists;
}

inline std::vector<std::string> ids_of(const std::vector<DatasetImage>& images) {
  std::vector<std::string> ids;
  for (const auto& img : images) ids.push_back(img.id);
  return ids;
}

// Source of a query: the authentic image it was spliced from.
inline std::map<std::string, std::string> source_truth(const std::vector<DatasetImage>& queries) {
  std::map<std::string, std::string> gt;
  for (const auto& q : queries) gt[q.id] = q.source_id;
  return gt;
}

struct ErrorSummary {
  std::size_t count = 0;
  double mean = 0, p50 = 0, p90 = 0, p99 = 0, max = 0;
};

inline ErrorSummary summarize_errors(std::vector<double> e) {
  ErrorSummary s;
  s.count = e.size();
  if (e.empty()) return s;
  std::sort(e.begin(), e.end());
  double sum = 0;
  for (double v : e) sum += v;
  s.mean = sum / static_cast<double>(e.size());
  auto q = [&](double f) { return e[static_cast<std::size_t>(std::floor(f * (e.size() - 1)))]; };
  s.p50 = q(0.5);
  s.p90 = q(0.9);
  s.p99 = q(0.99);
  s.max = e.back();
  return s;
}

// |adc - exact| over every (query embedding, database embedding) pair, as
// seen by the two indexes (which must hold the same images in the same
// order).
inline ErrorSummary adc_error_distribution(const ObjectIndex& exact, const ObjectIndex& pq, const EmbeddingSets& queries) {
  require(exact.mode() == IndexMode::Exact && pq.mode() == IndexMode::ProductQuantized,
          "adc_error_distribution: need one exact and one quantized index");
  require(exact.embedding_count() == pq.embedding_count(), "adc_error_distribution: indexes differ");
  std::vector<double> errors;
  for (const auto& raw : queries) {
    const auto q = prepare_query(pq, raw);
    for (const auto& e : q) {
      const AdcTable table(*pq.codebook(), e.vector.values);
      for (std::size_t r = 0; r < exact.embedding_count(); ++r) {
        errors.push_back(std::abs(table.distance(pq.code(r)) - squared_distance(e.vector.values, exact.row(r))));
      }
    }
  }
  return summarize_errors(std::move(errors));
}

inline double top1_agreement(const std::vector<RankedList>& a, const std::vector<RankedList>& b) {
  require(a.size() == b.size() && !a.empty(), "top1_agreement: list count mismatch");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same += !a[i].entries.empty() && !b[i].entries.empty() && a[i].entries[0].image_id == b[i].entries[0].image_id;
  }
  return static_cast<double>(same) / static_cast<double>(a.size());
}

struct RetrievalScores {
  std::string method;
  bool whitening = false;
  std::string mode;  // exact | pq
  int max_objects = kDefaultMaxObjects;
  double r1 = 0, r10 = 0, r100 = 0, map = 0;
  double pq_agreement = -1;  // pq rows only
  std::optional<ErrorSummary> adc_error;
};

struct DistillSummary {
  std::string variant;
  double leading_mean = 0;
  double trailing_mean = 0;
  double final_loss = 0;
};

struct LocalizationSummary {
  int queries = 0;
  int scored = 0;
  int misses = 0;
  int degenerate = 0;
  double mean_f1 = 0;
  double mean_mcc = 0;
  std::vector<LocalizationResult> results;
};

struct BenchmarkConfig {
  SyntheticConfig data;
  std::vector<std::string> methods{"mac",        "spoc",          "gem",           "rmac",         "oe-hog",
                                   "oe-teacher", "oe-student-S1", "oe-student-S2", "oe-student-S3"};
  std::vector<bool> whitening{false, true};
  bool pq = true;
  PqSettings pq_settings;
  int max_objects = kDefaultMaxObjects;
  std::vector<int> max_objects_sweep{1, 2, 4, 8};
  std::string sweep_method = "oe-teacher";
  // Batch 8 instead of 64, so the step size is raised to match.
  TrainConfig train = [] {
    TrainConfig t;
    t.learning_rate = 5e-3;
    return t;
  }();
  int train_images = 200;
  bool localization = true;
  SyntheticConfig localization_data = [] {
    SyntheticConfig c;
    c.kind = DatasetKind::Localization;
    c.database_size = 100;
    c.query_count = 50;
    c.seed = 17;
    return c;
  }();
  LocalizeOptions localize;
  unsigned threads = 1;

  void validate() const {
    data.validate();
    localization_data.validate();
    require(!methods.empty(), "benchmark: no methods configured");
    for (const auto& m : methods) parse_method(m);
    parse_method(sweep_method);
    require(!whitening.empty(), "benchmark: whitening list is empty");
    require(train_images >= 1, "benchmark: train_images must be >= 1");
    require(max_objects >= 1, "benchmark: max_objects must be >= 1");
    for (int mo : max_objects_sweep) require(mo >= 1, "benchmark: max_objects_sweep entries must be >= 1");
    require(pq_settings.m >= 1 && pq_settings.k >= 1 && pq_settings.k <= 256 && pq_settings.iterations >= 1,
            "benchmark: invalid pq settings");
    train.validate();
  }
};

struct EvalReport {
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::vector<RetrievalScores> retrieval;
  std::vector<RetrievalScores> sweep;
  std::vector<DistillSummary> distill;
  std::optional<LocalizationSummary> localization;
};

inline double window_mean(const std::vector<double>& v, bool leading, std::size_t n = 100) {
  require(!v.empty(), "window_mean: empty curve");
  n = std::min(n, v.size());
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += leading ? v[i] : v[v.size() - n + i];
  return s / static_cast<double>(n);
}

inline DistillSummary summarize_training(Variant v, const std::vector<double>& curve) {
  return {to_string(v), window_mean(curve, true), window_mean(curve, false), curve.back()};
}

inline std::vector<MultiScaleFeatures> distillation_set(const std::vector<DatasetImage>& images, int count) {
  std::vector<MultiScaleFeatures> out;
  for (int i = 0; i < count && i < static_cast<int>(images.size()); ++i) {
    out.push_back(filter_bank_features(images[i].image));
  }
  return out;
}

inline RetrievalScores score_lists(const std::string& method, bool whitening, const std::string& mode,
                                   int max_objects, const std::vector<RankedList>& lists,
                                   const std::vector<DatasetImage>& queries) {
  const auto gt = source_truth(queries);
  std::map<std::string, std::set<std::string>> gt_sets;
  for (const auto& [q, s] : gt) gt_sets[q] = {s};
  RetrievalScores r;
  r.method = method;
  r.whitening = whitening;
  r.mode = mode;
  r.max_objects = max_objects;
  r.r1 = recall_at_k(lists, gt, 1);
  r.r10 = recall_at_k(lists, gt, 10);
  r.r100 = recall_at_k(lists, gt, 100);
  r.map = mean_average_precision(lists, gt_sets);
  return r;
}

// Runs `cfg.localize` over a localization dataset with the given extractor
// (no whitening). The expected original of each query is its host scene.
inline LocalizationSummary run_localization(const Dataset& ds, const Extractor& ex, const LocalizeOptions& opt) {
  PipelineConfig pc = ex.config();
  pc.whitening = false;
  const auto index = build_index(pc, embed_images(ex, ds.database), ids_of(ds.database));
  std::map<std::string, const DatasetImage*> by_id;
  for (const auto& img : ds.database) by_id[img.id] = &img;
  auto load = [&](const std::string& id) -> Raster { return by_id.at(id)->image; };
  LocalizationSummary s;
  for (const auto& q : ds.queries) {
    const auto emb = ex.embed(q.id, q.image, q.detections);
    const std::string expected = index.find(q.target_id) ? q.target_id : q.source_id;
    auto r = localize(q.id, q.image, emb, index, load, q.gt_mask ? &*q.gt_mask : nullptr, expected, opt);
    ++s.queries;
    if (r.retrieval_miss) ++s.misses;
    if (r.degenerate) ++s.degenerate;
    if (r.scored) {
      ++s.scored;
      s.mean_f1 += r.f1;
      s.mean_mcc += r.mcc;
    }
    s.results.push_back(std::move(r));
  }
  if (s.scored > 0) {
    s.mean_f1 /= s.scored;
    s.mean_mcc /= s.scored;
  }
  return s;
}

inline nlohmann::json config_json(const BenchmarkConfig& c) {
  auto data = [](const SyntheticConfig& d) {
    return nlohmann::json{{"kind", d.kind == DatasetKind::Retrieval ? "retrieval" : "localization"},
                          {"database_size", d.database_size},
                          {"query_count", d.query_count},
                          {"seed", d.seed},
                          {"image_size", d.scene.width},
                          {"objects_per_scene", d.scene.num_objects},
                          {"jitter", d.jitter},
                          {"drop_probability", d.drop_probability},
                          {"spurious_rate", d.spurious_rate},
                          {"min_scale", d.min_scale},
                          {"max_scale", d.max_scale}};
  };
  nlohmann::json wl = nlohmann::json::array();
  for (bool w : c.whitening) wl.push_back(w);
  return {{"data", data(c.data)},
          {"methods", c.methods},
          {"whitening", wl},
          {"pq", c.pq},
          {"pq_m", c.pq_settings.m},
          {"pq_k", c.pq_settings.k},
          {"pq_iterations", c.pq_settings.iterations},
          {"pq_seed", c.pq_settings.seed},
          {"max_objects", c.max_objects},
          {"max_objects_sweep", c.max_objects_sweep},
          {"sweep_method", c.sweep_method},
          {"train_iterations", c.train.iterations},
          {"train_batch_size", c.train.batch_size},
          {"train_learning_rate", c.train.learning_rate},
          {"train_seed", c.train.seed},
          {"train_images", c.train_images},
          {"localization", c.localization},
          {"localization_data", data(c.localization_data)},
          {"localization_level", to_string(c.localize.level)}};
}

namespace detail {

inline void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* where) {
  require(j.is_object(), std::string(where) + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    require(known, std::string(where) + ": unknown key '" + k + "'");
  }
}

template <class T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

}  // namespace detail

// Inverse of the "data" blocks of config_json. Missing keys keep `base`.
inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j, SyntheticConfig base = {}) {
  detail::reject_unknown(j,
                         {"kind", "database_size", "query_count", "seed", "image_size", "objects_per_scene", "jitter",
                          "drop_probability", "spurious_rate", "min_scale", "max_scale"},
                         "config data");
  if (j.contains("kind")) {
    const auto k = j.at("kind").get<std::string>();
    require(k == "retrieval" || k == "localization", "config: kind must be retrieval or localization");
    base.kind = k == "retrieval" ? DatasetKind::Retrieval : DatasetKind::Localization;
  }
  detail::read_key(j, "database_size", base.database_size);
  detail::read_key(j, "query_count", base.query_count);
  detail::read_key(j, "seed", base.seed);
  if (j.contains("image_size")) {
    detail::read_key(j, "image_size", base.scene.width);
    base.scene.height = base.scene.width;
  }
  detail::read_key(j, "objects_per_scene", base.scene.num_objects);
  detail::read_key(j, "jitter", base.jitter);
  detail::read_key(j, "drop_probability", base.drop_probability);
  detail::read_key(j, "spurious_rate", base.spurious_rate);
  detail::read_key(j, "min_scale", base.min_scale);
  detail::read_key(j, "max_scale", base.max_scale);
  base.validate();
  return base;
}

// Reads the keys written by config_json. Unknown keys are an error.
inline BenchmarkConfig benchmark_config_from_json(const nlohmann::json& j) {
  detail::reject_unknown(j,
                         {"data", "methods", "whitening", "pq", "pq_m", "pq_k", "pq_iterations", "pq_seed",
                          "max_objects", "max_objects_sweep", "sweep_method", "train_iterations", "train_batch_size",
                          "train_learning_rate", "train_seed", "train_images", "localization", "localization_data",
                          "localization_level"},
                         "config");
  BenchmarkConfig c;
  if (j.contains("data")) c.data = synthetic_config_from_json(j.at("data"), c.data);
  if (j.contains("localization_data")) {
    c.localization_data = synthetic_config_from_json(j.at("localization_data"), c.localization_data);
  }
  detail::read_key(j, "methods", c.methods);
  detail::read_key(j, "whitening", c.whitening);
  detail::read_key(j, "pq", c.pq);
  detail::read_key(j, "pq_m", c.pq_settings.m);
  detail::read_key(j, "pq_k", c.pq_settings.k);
  detail::read_key(j, "pq_iterations", c.pq_settings.iterations);
  detail::read_key(j, "pq_seed", c.pq_settings.seed);
  detail::read_key(j, "max_objects", c.max_objects);
  detail::read_key(j, "max_objects_sweep", c.max_objects_sweep);
  detail::read_key(j, "sweep_method", c.sweep_method);
  detail::read_key(j, "train_iterations", c.train.iterations);
  detail::read_key(j, "train_batch_size", c.train.batch_size);
  detail::read_key(j, "train_learning_rate", c.train.learning_rate);
  detail::read_key(j, "train_seed", c.train.seed);
  detail::read_key(j, "train_images", c.train_images);
  detail::read_key(j, "localization", c.localization);
  if (j.contains("localization_level")) c.localize.level = parse_residual_level(j.at("localization_level").get<std::string>());
  c.validate();
  return c;
}

// Every configured method x whitening setting in exact mode (and pq when
// enabled), a max_objects sweep, student training for the variants the
// method list needs, and the localization benchmark.
inline EvalReport run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  EvalReport report;
  report.config = config_json(cfg);
  report.seed = cfg.data.seed;
  const Dataset ds = generate_dataset(cfg.data);
  const auto db_ids = ids_of(ds.database);
  const auto q_ids = ids_of(ds.queries);
  const int depth = static_cast<int>(ds.database.size());

  std::map<Variant, StudentParams<float>> students;
  std::optional<std::vector<MultiScaleFeatures>> train_set;
  for (const auto& name : cfg.methods) {
    const auto spec = parse_method(name);
    if (!spec.needs_student() || students.contains(spec.variant)) continue;
    if (!train_set) train_set = distillation_set(ds.database, cfg.train_images);
    auto trained = train_student(spec.variant, *train_set, cfg.train);
    report.distill.push_back(summarize_training(spec.variant, trained.loss_curve));
    students.emplace(spec.variant, std::move(trained.params));
  }
  auto make_extractor = [&](const MethodSpec& spec, bool whitening, int max_objects) {
    PipelineConfig pc;
    pc.method = spec;
    pc.whitening = whitening;
    pc.max_objects = max_objects;
    std::optional<StudentParams<float>> st;
    if (spec.needs_student()) st = students.at(spec.variant);
    return Extractor(pc, st);
  };

  for (const auto& name : cfg.methods) {
    const auto spec = parse_method(name);
    const Extractor base = make_extractor(spec, false, cfg.max_objects);
    const auto db_raw = embed_images(base, ds.database);
    const auto q_raw = embed_images(base, ds.queries);
    for (bool w : cfg.whitening) {
      PipelineConfig pc = base.config();
      pc.whitening = w;
      const auto exact = build_index(pc, db_raw, db_ids);
      const auto lists = rank_queries(exact, q_raw, q_ids, depth, cfg.threads);
      report.retrieval.push_back(score_lists(name, w, "exact", cfg.max_objects, lists, ds.queries));
      if (cfg.pq) {
        const auto quant = build_index(pc, db_raw, db_ids, cfg.pq_settings, exact.whitening());
        const auto plists = rank_queries(quant, q_raw, q_ids, depth, cfg.threads);
        auto row = score_lists(name, w, "pq", cfg.max_objects, plists, ds.queries);
        row.pq_agreement = top1_agreement(lists, plists);
        row.adc_error = adc_error_distribution(exact, quant, q_raw);
        report.retrieval.push_back(std::move(row));
      }
    }
  }

  const auto sweep_spec = parse_method(cfg.sweep_method);
  if (!sweep_spec.needs_student() || students.contains(sweep_spec.variant)) {
    for (int mo : cfg.max_objects_sweep) {
      const Extractor ex = make_extractor(sweep_spec, false, mo);
      const auto index = build_index(ex.config(), embed_images(ex, ds.database), db_ids);
      const auto lists = rank_queries(index, embed_images(ex, ds.queries), q_ids, depth, cfg.threads);
      report.sweep.push_back(score_lists(cfg.sweep_method, false, "exact", mo, lists, ds.queries));
    }
  }

  if (cfg.localization) {
    const Dataset loc = generate_dataset(cfg.localization_data);
    report.localization = run_localization(loc, make_extractor(parse_method("oe-teacher"), false, cfg.max_objects),
                                           cfg.localize);
  }
  return report;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// One row per (section, method, whitening, mode, max_objects).
inline std::string report_csv(const EvalReport& r) {
  std::ostringstream o;
  o << "section,method,whitening,mode,max_objects,r1,r10,r100,map,pq_agreement\n";
  auto row = [&](const char* section, const RetrievalScores& s) {
    o << section << ',' << s.method << ',' << (s.whitening ? "on" : "off") << ',' << s.mode << ',' << s.max_objects
      << ',' << fmt(s.r1) << ',' << fmt(s.r10) << ',' << fmt(s.r100) << ',' << fmt(s.map) << ','
      << (s.pq_agreement >= 0 ? fmt(s.pq_agreement) : "") << '\n';
  };
  for (const auto& s : r.retrieval) row("retrieval", s);
  for (const auto& s : r.sweep) row("sweep", s);
  return o.str();
}

inline nlohmann::json to_json(const ErrorSummary& e) {
  return {{"count", e.count}, {"mean", e.mean}, {"p50", e.p50}, {"p90", e.p90}, {"p99", e.p99}, {"max", e.max}};
}

inline std::string report_json(const EvalReport& r) {
  nlohmann::json j;
  j["config"] = r.config;
  j["seed"] = r.seed;
  j["retrieval"] = nlohmann::json::array();
  for (const auto* list : {&r.retrieval, &r.sweep}) {
    const char* section = list == &r.retrieval ? "retrieval" : "sweep";
    if (!j.contains(section)) j[section] = nlohmann::json::array();
    for (const auto& s : *list) {
      nlohmann::json row{{"method", s.method}, {"whitening", s.whitening}, {"mode", s.mode},
                         {"max_objects", s.max_objects}, {"r1", s.r1}, {"r10", s.r10},
                         {"r100", s.r100}, {"map", s.map}};
      if (s.pq_agreement >= 0) row["pq_agreement"] = s.pq_agreement;
      if (s.adc_error) row["adc_error"] = to_json(*s.adc_error);
      j[section].push_back(row);
    }
  }
  j["distill"] = nlohmann::json::array();
  for (const auto& d : r.distill) {
    j["distill"].push_back({{"variant", d.variant}, {"leading_mean", d.leading_mean},
                            {"trailing_mean", d.trailing_mean}, {"final_loss", d.final_loss}});
  }
  if (r.localization) {
    const auto& l = *r.localization;
    j["localization"] = {{"queries", l.queries}, {"scored", l.scored},     {"misses", l.misses},
                         {"degenerate", l.degenerate}, {"mean_f1", l.mean_f1}, {"mean_mcc", l.mean_mcc}};
  }
  return j.dump(2) + "\n";
}

}  // namespace sir
