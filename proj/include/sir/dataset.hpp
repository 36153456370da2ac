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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sir/detection.hpp"
#include "sir/error.hpp"
#include "sir/raster.hpp"
#include "sir/rng.hpp"
#include "sir/scene.hpp"
#include "sir/splice.hpp"

namespace sir {

enum class Role { Authentic, Query };

inline std::string to_string(Role r) { return r == Role::Authentic ? "authentic" : "query"; }
inline Role parse_role(const std::string& s) {
  if (s == "authentic") return Role::Authentic;
  if (s == "query") return Role::Query;
  throw FormatError("manifest: unknown role '" + s + "'");
}

// One manifest record. Paths are relative to the manifest's directory.
// source_id / target_id / gt_mask are set for queries only.
struct ManifestRecord {
  std::string id;
  Role role = Role::Authentic;
  std::string raster;
  std::string detections;
  std::string gt_mask;
  std::string source_id;
  std::string target_id;
  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct Manifest {
  std::vector<ManifestRecord> records;
  std::string base_dir;  // directory the relative paths resolve against
  friend bool operator==(const Manifest& a, const Manifest& b) { return a.records == b.records; }

  std::string resolve(const std::string& rel) const {
    return (std::filesystem::path(base_dir) / rel).string();
  }
  std::vector<const ManifestRecord*> with_role(Role r) const {
    std::vector<const ManifestRecord*> out;
    for (const auto& rec : records) {
      if (rec.role == r) out.push_back(&rec);
    }
    return out;
  }
};

inline nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j{{"id", r.id}, {"role", to_string(r.role)}, {"raster", r.raster}, {"detections", r.detections}};
  if (r.role == Role::Query) {
    j["gt_mask"] = r.gt_mask;
    j["source_id"] = r.source_id;
    if (!r.target_id.empty()) j["target_id"] = r.target_id;
  }
  return j;
}

inline std::string manifest_text(const Manifest& m) {
  nlohmann::json j{{"format", "sir-manifest"}, {"version", 1}, {"records", nlohmann::json::array()}};
  for (const auto& r : m.records) j["records"].push_back(to_json(r));
  return j.dump(2) + "\n";
}

inline void write_manifest(const std::string& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << manifest_text(m);
}

inline Manifest parse_manifest(const std::string& text, std::string base_dir = ".") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "sir-manifest") throw FormatError("manifest: missing format tag");
  if (j.value("version", 0) != 1) throw FormatError("manifest: unsupported version");
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::map<std::string, int> seen;
  try {
    for (const auto& r : j.at("records")) {
      ManifestRecord rec;
      rec.id = r.at("id").get<std::string>();
      rec.role = parse_role(r.at("role").get<std::string>());
      rec.raster = r.at("raster").get<std::string>();
      rec.detections = r.at("detections").get<std::string>();
      if (rec.role == Role::Query) {
        rec.gt_mask = r.value("gt_mask", "");
        rec.source_id = r.at("source_id").get<std::string>();
        rec.target_id = r.value("target_id", "");
      }
      if (rec.id.empty()) throw FormatError("manifest: empty id");
      if (seen[rec.id]++) throw FormatError("manifest: duplicate id '" + rec.id + "'");
      m.records.push_back(std::move(rec));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest: ") + e.what());
  }
  return m;
}

inline Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_manifest(text, std::filesystem::path(path).parent_path().string());
}

inline nlohmann::json detections_json(const std::vector<Detection>& dets) {
  auto arr = nlohmann::json::array();
  for (const auto& d : dets) {
    arr.push_back({{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}}, {"score", d.score}, {"class_id", d.class_id}});
  }
  return arr;
}

inline std::vector<Detection> parse_detections(const nlohmann::json& arr) {
  std::vector<Detection> out;
  try {
    for (const auto& d : arr) {
      const auto& b = d.at("box");
      if (b.size() != 4) throw FormatError("detections: box must have 4 values");
      Detection det{{b[0].get<float>(), b[1].get<float>(), b[2].get<float>(), b[3].get<float>()},
                    d.at("score").get<float>(), d.at("class_id").get<int>()};
      if (!det.box.valid()) throw FormatError("detections: invalid box");
      out.push_back(det);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("detections: ") + e.what());
  }
  return out;
}

inline void save_detections(const std::string& path, const std::vector<Detection>& dets) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << detections_json(dets).dump() << "\n";
}

inline std::vector<Detection> load_detections(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("detections: ") + e.what());
  }
  return parse_detections(j);
}

struct DatasetImage {
  std::string id;
  Role role = Role::Authentic;
  Raster image;
  std::vector<Detection> detections;
  std::optional<BinaryMask> gt_mask;
  std::string source_id;
  std::string target_id;
};

struct Dataset {
  std::vector<DatasetImage> database;
  std::vector<DatasetImage> queries;

  const DatasetImage* find(const std::string& id) const {
    for (const auto* set : {&database, &queries}) {
      for (const auto& img : *set) {
        if (img.id == id) return &img;
      }
    }
    return nullptr;
  }
};

// Retrieval: database = authentic scenes; each query splices an object of a
// database scene into a fresh scene absent from the database, so the only
// authentic match is the source. Localization: the host scene is in the
// database and the donor is not, and the object keeps its position.
enum class DatasetKind { Retrieval, Localization };

struct SyntheticConfig {
  DatasetKind kind = DatasetKind::Retrieval;
  int database_size = 500;
  int query_count = 50;
  std::uint64_t seed = 7;
  SceneParams scene;
  double jitter = 0.05;
  double drop_probability = 0.0;
  double spurious_rate = 0.0;
  double min_scale = 1.0;
  double max_scale = 1.0;

  void validate() const {
    require(database_size >= 1, "synthetic: database_size must be >= 1");
    require(query_count >= 0, "synthetic: query_count must be >= 0");
    require(kind == DatasetKind::Retrieval || query_count <= database_size,
            "synthetic: localization needs one host per query");
    require(jitter >= 0.0 && jitter < 0.5, "synthetic: jitter must be in [0, 0.5)");
    require(min_scale > 0.0 && min_scale <= max_scale, "synthetic: invalid scale range");
    require(scene.num_objects >= 1, "synthetic: scenes need at least one object to splice");
  }
};

namespace detail {

inline constexpr std::uint64_t kDatabaseStream = 1, kDonorStream = 2, kQueryStream = 3, kOracleStream = 4;

inline std::string numbered(const char* prefix, int i) {
  std::string n = std::to_string(i);
  return std::string(prefix) + std::string(n.size() < 4 ? 4 - n.size() : 0, '0') + n;
}

inline Placement random_placement(Rng& rng, const Box& b, double scale, int width, int height) {
  Placement p;
  p.scale = scale;
  const double w = b.width() * scale, h = b.height() * scale;
  const double fx = std::max(0.0, width - w), fy = std::max(0.0, height - h);
  const double x = std::floor(rng.uniform(0.0, fx)), y = std::floor(rng.uniform(0.0, fy));
  p.tx = x - scale * b.x1;
  p.ty = y - scale * b.y1;
  return p;
}

inline bool clear_of(const Box& b, const Scene& s, int margin) {
  const float g = static_cast<float>(std::max(margin, 0));
  for (const auto& o : s.objects) {
    const Box& ob = o.detection.box;
    if (b.x1 < ob.x2 + g && ob.x1 < b.x2 + g && b.y1 < ob.y2 + g && ob.y1 < b.y2 + g) return false;
  }
  return true;
}

}  // namespace detail

inline constexpr int kPlacementRetries = 200;

inline Dataset generate_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  OracleOptions oracle{cfg.jitter, mix_seed(cfg.seed, detail::kOracleStream), cfg.drop_probability, cfg.spurious_rate};
  Dataset ds;
  std::vector<Scene> db_scenes;
  for (int i = 0; i < cfg.database_size; ++i) {
    Scene s = generate_scene(mix_seed(mix_seed(cfg.seed, detail::kDatabaseStream), i), cfg.scene);
    s.id = detail::numbered("db-", i);
    ds.database.push_back({s.id, Role::Authentic, s.image, detection_oracle(s, oracle), std::nullopt, "", ""});
    db_scenes.push_back(std::move(s));
  }
  Rng rng(mix_seed(cfg.seed, detail::kQueryStream));
  // Hosts for localization are distinct database scenes.
  std::vector<int> hosts(cfg.database_size);
  for (int i = 0; i < cfg.database_size; ++i) hosts[i] = i;
  rng.shuffle(hosts);
  for (int q = 0; q < cfg.query_count; ++q) {
    Scene donor = generate_scene(mix_seed(mix_seed(cfg.seed, detail::kDonorStream), q), cfg.scene);
    donor.id = detail::numbered("donor-", q);
    const Scene* source = nullptr;
    const Scene* target = nullptr;
    if (cfg.kind == DatasetKind::Retrieval) {
      source = &db_scenes[rng.below(db_scenes.size())];
      target = &donor;
    } else {
      source = &donor;
      target = &db_scenes[hosts[q]];
    }
    const int obj = static_cast<int>(rng.below(source->objects.size()));
    const Box& b = source->objects[obj].detection.box;
    const double scale = cfg.min_scale == cfg.max_scale ? cfg.min_scale : rng.uniform(cfg.min_scale, cfg.max_scale);
    Placement place;
    if (cfg.kind == DatasetKind::Retrieval) {
      // Prefer a spot whose box keeps clear of the host's objects.
      for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
        place = detail::random_placement(rng, b, scale, target->image.width, target->image.height);
        if (detail::clear_of(place_box(b, place), *target, cfg.scene.box_margin)) break;
      }
    }
    SplicedPair pair = splice(*source, *target, obj, place);
    DatasetImage img;
    img.id = detail::numbered("q-", q);
    img.role = Role::Query;
    img.image = pair.spliced;
    img.detections = detection_oracle(pair, oracle);
    img.gt_mask = pair.gt_mask;
    img.source_id = pair.source_id;
    img.target_id = pair.target_id;
    ds.queries.push_back(std::move(img));
  }
  return ds;
}

// Writes rasters/, detections/, masks/ and manifest.json under `dir`.
inline Manifest write_dataset(const std::string& dir, const Dataset& ds) {
  namespace fs = std::filesystem;
  for (const char* sub : {"rasters", "detections", "masks"}) fs::create_directories(fs::path(dir) / sub);
  Manifest m;
  m.base_dir = dir;
  for (const auto* set : {&ds.database, &ds.queries}) {
    for (const auto& img : *set) {
      ManifestRecord r;
      r.id = img.id;
      r.role = img.role;
      r.raster = "rasters/" + img.id + ".oetf";
      r.detections = "detections/" + img.id + ".json";
      save_raster(m.resolve(r.raster), img.image);
      save_detections(m.resolve(r.detections), img.detections);
      if (img.role == Role::Query) {
        r.source_id = img.source_id;
        r.target_id = img.target_id;
        if (img.gt_mask) {
          r.gt_mask = "masks/" + img.id + ".oetf";
          save_mask(m.resolve(r.gt_mask), *img.gt_mask);
        }
      }
      m.records.push_back(std::move(r));
    }
  }
  write_manifest((fs::path(dir) / "manifest.json").string(), m);
  return m;
}

inline DatasetImage load_record(const Manifest& m, const ManifestRecord& r) {
  DatasetImage img;
  img.id = r.id;
  img.role = r.role;
  img.image = load_raster(m.resolve(r.raster));
  img.detections = load_detections(m.resolve(r.detections));
  if (!r.gt_mask.empty()) {
    img.gt_mask = load_mask(m.resolve(r.gt_mask));
    if (img.gt_mask->width != img.image.width || img.gt_mask->height != img.image.height) {
      throw FormatError("manifest: gt mask of '" + r.id + "' does not match its raster");
    }
  }
  img.source_id = r.source_id;
  img.target_id = r.target_id;
  return img;
}

inline Dataset load_dataset(const Manifest& m) {
  Dataset ds;
  for (const auto& r : m.records) {
    (r.role == Role::Authentic ? ds.database : ds.queries).push_back(load_record(m, r));
  }
  return ds;
}

}  // namespace sir
