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

// Command-line front end: synthetic data, extraction, distillation, index
// build, querying, localization, evaluation and the full benchmark.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "sir/sir.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sir::Error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw sir::FormatError(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sir::Error("cannot open " + path.string());
  out << text;
  if (!out) throw sir::Error("write failed: " + path.string());
}

std::string fmt(double v) { return sir::fmt(v); }

std::vector<sir::DatasetImage> load_role(const sir::Manifest& m, sir::Role role) {
  std::vector<sir::DatasetImage> out;
  for (const auto* r : m.with_role(role)) out.push_back(sir::load_record(m, *r));
  return out;
}

std::optional<sir::StudentParams<float>> student_for(const sir::MethodSpec& spec, const std::string& dir) {
  if (!spec.needs_student()) return std::nullopt;
  if (dir.empty()) throw sir::InvalidArgument(spec.name() + " needs --student <checkpoint dir>");
  return sir::load_checkpoint(dir);
}

// Rebuilds the extractor an index was built with.
sir::Extractor extractor_for(const sir::ObjectIndex& index, const std::string& student_dir) {
  auto pc = sir::pipeline_from_metadata(index.metadata());
  std::string dir = student_dir;
  if (dir.empty()) {
    const auto meta = json::parse(index.metadata());
    dir = meta.value("student", std::string());
  }
  return sir::Extractor(pc, student_for(pc.method, dir));
}

std::pair<int, int> parse_pq(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw sir::InvalidArgument("--pq expects m,k");
  try {
    return {std::stoi(s.substr(0, comma)), std::stoi(s.substr(comma + 1))};
  } catch (const std::exception&) {
    throw sir::InvalidArgument("--pq expects m,k, got '" + s + "'");
  }
}

struct Truth {
  std::map<std::string, std::string> source;
  std::map<std::string, std::set<std::string>> sets;
};

Truth truth_of(const sir::Manifest& m) {
  Truth t;
  for (const auto* r : m.with_role(sir::Role::Query)) {
    if (r->source_id.empty()) continue;
    t.source[r->id] = r->source_id;
    t.sets[r->id] = {r->source_id};
  }
  return t;
}

json retrieval_summary(const std::vector<sir::RankedList>& lists, const Truth& t) {
  json j{{"queries", lists.size()}};
  if (t.source.empty()) return j;
  for (std::size_t k : {1, 10, 100}) j["r" + std::to_string(k)] = sir::recall_at_k(lists, t.source, k);
  std::size_t skipped = 0;
  j["map"] = sir::mean_average_precision(lists, t.sets, &skipped);
  j["map_skipped"] = skipped;
  return j;
}

// ---- subcommands ----------------------------------------------------------

struct GenOptions {
  std::string out, config, kind;
  int db = -1, queries = -1;
  long long seed = -1;
};

int cmd_gen(const GenOptions& o) {
  sir::SyntheticConfig sc;
  if (!o.config.empty()) {
    const json j = read_json_file(o.config);
    sc = sir::synthetic_config_from_json(j.contains("data") ? j.at("data") : j, sc);
  }
  if (!o.kind.empty()) sc.kind = o.kind == "localization" ? sir::DatasetKind::Localization
                                                          : sir::DatasetKind::Retrieval;
  if (o.db >= 0) sc.database_size = o.db;
  if (o.queries >= 0) sc.query_count = o.queries;
  if (o.seed >= 0) sc.seed = static_cast<std::uint64_t>(o.seed);
  sc.validate();
  const auto ds = sir::generate_dataset(sc);
  auto m = sir::write_dataset(o.out, ds);
  sir::write_manifest((fs::path(o.out) / "manifest.json").string(), m);
  std::cout << "wrote " << ds.database.size() << " authentic and " << ds.queries.size() << " query images to "
            << o.out << "\n";
  return 0;
}

struct ExtractOptions {
  std::string manifest, out_dir, method = "oe-teacher", student;
  int max_objects = sir::kDefaultMaxObjects;
  bool maps = false;
};

int cmd_extract(const ExtractOptions& o) {
  const auto m = sir::read_manifest(o.manifest);
  sir::PipelineConfig pc;
  pc.method = sir::parse_method(o.method);
  pc.max_objects = o.max_objects;
  pc.whitening = false;
  const sir::Extractor ex(pc, student_for(pc.method, o.student));
  fs::create_directories(o.out_dir);
  std::ostringstream index_csv;
  index_csv << "image_id,objects,dim\n";
  for (const auto& rec : m.records) {
    const auto img = sir::load_record(m, rec);
    const auto emb = ex.embed(img.id, img.image, img.detections);
    std::vector<float> flat;
    json boxes = json::array();
    for (const auto& e : emb) {
      flat.insert(flat.end(), e.vector.values.begin(), e.vector.values.end());
      boxes.push_back({{"box", {e.box.x1, e.box.y1, e.box.x2, e.box.y2}}, {"score", e.score}});
    }
    const auto dim = static_cast<std::uint64_t>(emb.front().vector.dim());
    sir::oetf::save((fs::path(o.out_dir) / (img.id + ".emb.oetf")).string(),
                    sir::oetf::from_f32({emb.size(), dim}, flat));
    write_text(fs::path(o.out_dir) / (img.id + ".boxes.json"), boxes.dump(2) + "\n");
    if (o.maps) {
      const auto f = sir::filter_bank_features(img.image);
      const std::pair<const char*, const sir::FeatureMap*> levels[] = {
          {"f2", &f.f2}, {"f3", &f.f3}, {"f4", &f.f4}, {"teacher", &f.teacher}};
      for (const auto& [name, map] : levels) {
        sir::oetf::save((fs::path(o.out_dir) / (img.id + "." + name + ".oetf")).string(),
                        sir::oetf::from_feature_map(*map));
      }
    }
    index_csv << img.id << ',' << emb.size() << ',' << dim << '\n';
  }
  write_text(fs::path(o.out_dir) / "embeddings.csv", index_csv.str());
  std::cout << "extracted " << m.records.size() << " images with " << o.method << "\n";
  return 0;
}

struct TrainOptions {
  std::string manifest, variant = "S3", out;
  int iterations = 2000, batch = 8, images = 200;
  double lr = 5e-3;
  long long seed = 1;
};

int cmd_distill(const TrainOptions& o) {
  const auto m = sir::read_manifest(o.manifest);
  const auto db = load_role(m, sir::Role::Authentic);
  if (db.empty()) throw sir::InvalidArgument("distill-train: manifest has no authentic images");
  sir::TrainConfig tc;
  tc.iterations = o.iterations;
  tc.batch_size = o.batch;
  tc.learning_rate = o.lr;
  tc.seed = static_cast<std::uint64_t>(o.seed);
  const auto variant = sir::parse_variant(o.variant);
  const auto set = sir::distillation_set(db, o.images);
  const auto r = sir::train_student(variant, set, tc);
  sir::save_checkpoint(o.out, r.params);
  sir::write_loss_curve((fs::path(o.out) / "loss.csv").string(), r.loss_curve);
  const auto s = sir::summarize_training(variant, r.loss_curve);
  const json summary{{"variant", s.variant},
                     {"iterations", tc.iterations},
                     {"images", set.size()},
                     {"leading_mean", s.leading_mean},
                     {"trailing_mean", s.trailing_mean},
                     {"final_loss", s.final_loss}};
  write_text(fs::path(o.out) / "summary.json", summary.dump(2) + "\n");
  std::cout << "trained " << s.variant << ": leading " << fmt(s.leading_mean) << " trailing "
            << fmt(s.trailing_mean) << "\n";
  return 0;
}

struct BuildOptions {
  std::string manifest, out, pq, method = "oe-teacher", student, whitening = "on";
  int max_objects = sir::kDefaultMaxObjects, pq_iterations = 25;
  long long pq_seed = 11;
};

int cmd_build(const BuildOptions& o) {
  const auto m = sir::read_manifest(o.manifest);
  const auto db = load_role(m, sir::Role::Authentic);
  if (db.empty()) throw sir::InvalidArgument("build-index: manifest has no authentic images");
  sir::PipelineConfig pc;
  pc.method = sir::parse_method(o.method);
  pc.max_objects = o.max_objects;
  pc.whitening = o.whitening == "on";
  const sir::Extractor ex(pc, student_for(pc.method, o.student));
  std::optional<sir::PqSettings> pq;
  if (!o.pq.empty()) {
    const auto [pm, pk] = parse_pq(o.pq);
    pq = sir::PqSettings{pm, pk, o.pq_iterations, static_cast<std::uint64_t>(o.pq_seed)};
  }
  // Record where originals and the student live so query/localize can find them.
  json extra{{"manifest", fs::absolute(o.manifest).lexically_normal().string()}};
  if (!o.student.empty()) extra["student"] = fs::absolute(o.student).lexically_normal().string();
  const auto out = sir::build_index(pc, sir::embed_images(ex, db), sir::ids_of(db), pq, std::nullopt, extra);
  sir::save_index(o.out, out);
  std::cout << "indexed " << out.image_count() << " images, " << out.embedding_count() << " embeddings ("
            << (pq ? "pq" : "exact") << ")\n";
  return 0;
}

struct QueryOptions {
  std::string index, query_manifest, report, student;
  int topk = 100;
  unsigned threads = 1;
};

int cmd_query(const QueryOptions& o) {
  const auto index = sir::load_index(o.index);
  const auto ex = extractor_for(index, o.student);
  const auto m = sir::read_manifest(o.query_manifest);
  const auto queries = load_role(m, sir::Role::Query);
  if (queries.empty()) throw sir::InvalidArgument("query: manifest has no query images");
  const auto lists = sir::rank_queries(index, sir::embed_images(ex, queries), sir::ids_of(queries), o.topk,
                                       o.threads);
  sir::write_rankings_csv(o.report, lists);
  const auto summary = retrieval_summary(lists, truth_of(m));
  write_text(o.report + ".summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

struct LocalizeCliOptions {
  std::string index, query_manifest, out_dir, manifest, student, level = "f2";
  int grid = sir::kDefaultThresholdGrid;
};

int cmd_localize(const LocalizeCliOptions& o) {
  const auto index = sir::load_index(o.index);
  const auto ex = extractor_for(index, o.student);
  std::string db_path = o.manifest;
  if (db_path.empty()) db_path = json::parse(index.metadata()).value("manifest", std::string());
  if (db_path.empty()) throw sir::InvalidArgument("localize: index does not record a manifest; pass --manifest");
  const auto db = sir::read_manifest(db_path);
  std::map<std::string, const sir::ManifestRecord*> originals;
  for (const auto* r : db.with_role(sir::Role::Authentic)) originals[r->id] = r;
  auto load = [&](const std::string& id) {
    const auto it = originals.find(id);
    if (it == originals.end()) throw sir::Error("localize: no raster for '" + id + "'");
    return sir::load_raster(db.resolve(it->second->raster));
  };

  sir::LocalizeOptions opt;
  opt.level = sir::parse_residual_level(o.level);
  opt.grid = o.grid;
  const auto qm = sir::read_manifest(o.query_manifest);
  fs::create_directories(o.out_dir);
  std::ostringstream csv;
  csv << "query_id,retrieved_id,hit,threshold,f1,mcc\n";
  std::size_t scored = 0, misses = 0;
  double f1 = 0, mcc = 0;
  for (const auto* rec : qm.with_role(sir::Role::Query)) {
    const auto q = sir::load_record(qm, *rec);
    const auto emb = sir::prepare_query(index, ex.embed(q.id, q.image, q.detections));
    std::string expected = !q.target_id.empty() && index.find(q.target_id) ? q.target_id : q.source_id;
    const auto r = sir::localize(q.id, q.image, emb, index, load, q.gt_mask ? &*q.gt_mask : nullptr, expected, opt);
    const fs::path base = fs::path(o.out_dir) / q.id;
    sir::oetf::save(base.string() + ".residual.oetf", sir::oetf::from_feature_map(r.residual));
    sir::save_mask(base.string() + ".mask.oetf", r.mask);
    sir::write_pgm(base.string() + ".mask.pgm", r.mask);
    const bool hit = !r.retrieval_miss;
    csv << q.id << ',' << r.retrieved_id << ',' << (hit ? 1 : 0) << ',' << fmt(r.threshold) << ','
        << (r.scored ? fmt(r.f1) : "") << ',' << (r.scored ? fmt(r.mcc) : "") << '\n';
    if (!hit) ++misses;
    if (r.scored) {
      ++scored;
      f1 += r.f1;
      mcc += r.mcc;
    }
  }
  write_text(fs::path(o.out_dir) / "scores.csv", csv.str());
  json summary{{"scored", scored}, {"retrieval_misses", misses}, {"level", o.level}};
  if (scored > 0) {
    summary["mean_f1"] = f1 / static_cast<double>(scored);
    summary["mean_mcc"] = mcc / static_cast<double>(scored);
  }
  write_text(fs::path(o.out_dir) / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump() << "\n";
  return 0;
}

struct EvaluateOptions {
  std::string rankings, query_manifest, out, localization;
};

int cmd_evaluate(const EvaluateOptions& o) {
  const auto lists = sir::read_rankings_csv(o.rankings);
  const auto truth = truth_of(sir::read_manifest(o.query_manifest));
  if (truth.source.empty()) throw sir::InvalidArgument("evaluate: manifest has no queries with a source_id");
  auto summary = retrieval_summary(lists, truth);
  if (!o.localization.empty()) {
    std::ifstream in(o.localization);
    if (!in) throw sir::Error("cannot open " + o.localization);
    std::string line;
    std::getline(in, line);
    std::size_t n = 0;
    double f1 = 0, mcc = 0;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
      if (f.size() == 6 && f[2] == "1" && !f[4].empty()) {
        ++n;
        f1 += std::stod(f[4]);
        mcc += std::stod(f[5]);
      }
    }
    summary["localization_scored"] = n;
    if (n > 0) {
      summary["mean_f1"] = f1 / static_cast<double>(n);
      summary["mean_mcc"] = mcc / static_cast<double>(n);
    }
  }
  std::ostringstream csv;
  csv << "metric,value\n";
  for (const auto& [k, v] : summary.items()) {
    csv << k << ',' << (v.is_number_float() ? fmt(v.get<double>()) : v.dump()) << '\n';
  }
  if (!o.out.empty()) {
    write_text(o.out, csv.str());
    write_text(o.out + ".summary.json", summary.dump(2) + "\n");
  }
  std::cout << csv.str();
  return 0;
}

struct BenchOptions {
  std::string config, out_dir;
  unsigned threads = 1;
  bool quick = false;
};

int cmd_bench(const BenchOptions& o) {
  sir::BenchmarkConfig cfg;
  if (!o.config.empty()) cfg = sir::benchmark_config_from_json(read_json_file(o.config));
  if (o.quick) {
    cfg.data.database_size = 60;
    cfg.data.query_count = 10;
    cfg.localization_data.database_size = 20;
    cfg.localization_data.query_count = 10;
    cfg.train.iterations = 100;
    cfg.train_images = 20;
    cfg.pq_settings.k = 16;
  }
  cfg.threads = o.threads;
  const auto report = sir::run_benchmark(cfg);
  fs::create_directories(o.out_dir);
  write_text(fs::path(o.out_dir) / "report.csv", sir::report_csv(report));
  write_text(fs::path(o.out_dir) / "report.json", sir::report_json(report));
  std::cout << sir::report_csv(report);
  if (report.localization) {
    std::cout << "localization: scored " << report.localization->scored << " mean F1 "
              << fmt(report.localization->mean_f1) << " mean MCC " << fmt(report.localization->mean_mcc) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spliced image retrieval with object embeddings"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen-synth", "Generate a seeded synthetic dataset and its manifest");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--config", gen.config, "JSON config (a \"data\" block or a whole benchmark config)");
  g->add_option("--kind", gen.kind, "retrieval or localization")->check(CLI::IsMember({"retrieval", "localization"}));
  g->add_option("--db", gen.db, "Authentic image count");
  g->add_option("--queries", gen.queries, "Query count");
  g->add_option("--seed", gen.seed, "Dataset seed");

  ExtractOptions ext;
  auto* e = app.add_subcommand("extract", "Write embeddings (and optionally feature maps) per image");
  e->add_option("--manifest", ext.manifest)->required();
  e->add_option("--out-dir", ext.out_dir)->required();
  e->add_option("--method", ext.method, "mac|spoc|gem|rmac|oe-hog|oe-teacher|oe-student-S{1,2,3}");
  e->add_option("--student", ext.student, "Checkpoint directory for oe-student");
  e->add_option("--max-objects", ext.max_objects)->check(CLI::PositiveNumber);
  e->add_flag("--maps", ext.maps, "Also write f2/f3/f4/teacher maps");

  TrainOptions tr;
  auto* d = app.add_subcommand("distill-train", "Train a student on the teacher maps of a manifest");
  d->add_option("--manifest", tr.manifest)->required();
  d->add_option("--out", tr.out, "Checkpoint directory")->required();
  d->add_option("--variant", tr.variant)->check(CLI::IsMember({"S1", "S2", "S3"}));
  d->add_option("--iterations", tr.iterations)->check(CLI::PositiveNumber);
  d->add_option("--batch", tr.batch)->check(CLI::PositiveNumber);
  d->add_option("--lr", tr.lr);
  d->add_option("--images", tr.images)->check(CLI::PositiveNumber);
  d->add_option("--seed", tr.seed);

  BuildOptions bo;
  auto* b = app.add_subcommand("build-index", "Embed the authentic images of a manifest into an index file");
  b->add_option("--manifest", bo.manifest)->required();
  b->add_option("--out", bo.out)->required();
  b->add_option("--pq", bo.pq, "Product quantization as m,k (e.g. 32,256)");
  b->add_option("--pq-iterations", bo.pq_iterations)->check(CLI::PositiveNumber);
  b->add_option("--pq-seed", bo.pq_seed);
  b->add_option("--max-objects", bo.max_objects)->check(CLI::PositiveNumber);
  b->add_option("--method", bo.method);
  b->add_option("--student", bo.student);
  b->add_option("--whitening", bo.whitening)->check(CLI::IsMember({"on", "off"}));

  QueryOptions qo;
  auto* q = app.add_subcommand("query", "Rank the database for every query of a manifest");
  q->add_option("--index", qo.index)->required();
  q->add_option("--query-manifest", qo.query_manifest)->required();
  q->add_option("--topk", qo.topk)->check(CLI::PositiveNumber);
  q->add_option("--report", qo.report, "Ranked-list CSV")->required();
  q->add_option("--student", qo.student);
  q->add_option("--threads", qo.threads)->check(CLI::PositiveNumber);

  LocalizeCliOptions lo;
  auto* l = app.add_subcommand("localize", "Localize spliced regions against the top-1 original");
  l->add_option("--index", lo.index)->required();
  l->add_option("--query-manifest", lo.query_manifest)->required();
  l->add_option("--out-dir", lo.out_dir)->required();
  l->add_option("--manifest", lo.manifest, "Database manifest (defaults to the one recorded in the index)");
  l->add_option("--student", lo.student);
  l->add_option("--level", lo.level)->check(CLI::IsMember({"f2", "f3", "f4", "teacher"}));
  l->add_option("--grid", lo.grid)->check(CLI::PositiveNumber);

  EvaluateOptions eo;
  auto* v = app.add_subcommand("evaluate", "Recompute metrics from a persisted ranked-list CSV");
  v->add_option("--rankings", eo.rankings)->required();
  v->add_option("--query-manifest", eo.query_manifest)->required();
  v->add_option("--localization", eo.localization, "scores.csv written by localize");
  v->add_option("--out", eo.out, "Metrics CSV");

  BenchOptions bn;
  auto* n = app.add_subcommand("bench", "Run the full benchmark and write report.csv / report.json");
  n->add_option("--config", bn.config, "JSON benchmark config");
  n->add_option("--out-dir", bn.out_dir)->required();
  n->add_option("--threads", bn.threads)->check(CLI::PositiveNumber);
  n->add_flag("--quick", bn.quick, "Tiny sizes, for smoke tests");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*g) return cmd_gen(gen);
    if (*e) return cmd_extract(ext);
    if (*d) return cmd_distill(tr);
    if (*b) return cmd_build(bo);
    if (*q) return cmd_query(qo);
    if (*l) return cmd_localize(lo);
    if (*v) return cmd_evaluate(eo);
    if (*n) return cmd_bench(bn);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 1;
  }
  return 1;
}
