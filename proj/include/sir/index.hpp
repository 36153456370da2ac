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
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "sir/embedding.hpp"
#include "sir/error.hpp"
#include "sir/oetf.hpp"
#include "sir/pq.hpp"
#include "sir/tensor.hpp"
#include "sir/whitening.hpp"

namespace sir {

enum class IndexMode : std::uint8_t { Exact = 0, ProductQuantized = 1 };

struct SearchHit {
  std::string image_id;
  double distance = 0.0;
  int query_index = -1;     // best pair, query side
  int database_index = -1;  // best pair, position within the image's set
  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

struct IndexedImage {
  std::string id;
  std::vector<Box> boxes;
  std::vector<float> scores;
  std::size_t first = 0;  // first row in the embedding (or code) table
  std::size_t count() const { return boxes.size(); }
};

// Per-image sets of object embeddings searched by minimum pairwise squared
// distance. Exact mode keeps float vectors; quantized mode keeps only m-byte
// PQ codes and ranks with asymmetric distances. Build with add_image(), then
// freeze(); a frozen index is read-only and safe to search concurrently.
class ObjectIndex {
 public:
  static ObjectIndex exact(int dim, int max_objects = kDefaultMaxObjects) {
    require(dim >= 1, "index: dim must be >= 1");
    require(max_objects >= 1, "index: max_objects must be >= 1");
    ObjectIndex idx;
    idx.mode_ = IndexMode::Exact;
    idx.dim_ = dim;
    idx.max_objects_ = max_objects;
    return idx;
  }

  static ObjectIndex quantized(PQCodebook codebook, int max_objects = kDefaultMaxObjects) {
    require(codebook.m >= 1 && codebook.k >= 1 && codebook.dsub >= 1, "index: invalid codebook");
    require(max_objects >= 1, "index: max_objects must be >= 1");
    ObjectIndex idx;
    idx.mode_ = IndexMode::ProductQuantized;
    idx.dim_ = codebook.dim();
    idx.max_objects_ = max_objects;
    idx.codebook_ = std::move(codebook);
    return idx;
  }

  IndexMode mode() const { return mode_; }
  int dim() const { return dim_; }
  int max_objects() const { return max_objects_; }
  bool frozen() const { return frozen_; }
  std::size_t image_count() const { return images_.size(); }
  std::size_t embedding_count() const { return rows_; }
  const std::vector<IndexedImage>& images() const { return images_; }
  const std::optional<PQCodebook>& codebook() const { return codebook_; }
  const std::vector<float>& vectors() const { return vectors_; }
  const std::vector<std::uint8_t>& codes() const { return codes_; }

  // Whitening applied to database embeddings, kept so queries can be
  // transformed identically.
  const std::optional<WhiteningTransform>& whitening() const { return whitening_; }
  void set_whitening(WhiteningTransform t) {
    if (frozen_) throw FrozenError();
    whitening_ = std::move(t);
  }

  // Free-form pipeline description stored alongside the index.
  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string json) {
    if (frozen_) throw FrozenError();
    metadata_ = std::move(json);
  }

  const IndexedImage* find(const std::string& id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &images_[it->second];
  }

  void add_image(const std::string& id, std::span<const ObjectEmbedding> embeddings) {
    if (frozen_) throw FrozenError();
    require(!id.empty() && id.size() < 65536, "index: image id must be 1..65535 bytes");
    require(!embeddings.empty(), "index: image '" + id + "' has no embeddings");
    require(static_cast<int>(embeddings.size()) <= max_objects_,
            "index: image '" + id + "' exceeds max_objects");
    require(!by_id_.contains(id), "index: duplicate image id '" + id + "'");
    IndexedImage img;
    img.id = id;
    img.first = rows_;
    for (const auto& e : embeddings) {
      require(e.vector.dim() == dim_, "index: embedding dimension mismatch");
      img.boxes.push_back(e.box);
      img.scores.push_back(e.score);
      if (mode_ == IndexMode::Exact) {
        vectors_.insert(vectors_.end(), e.vector.values.begin(), e.vector.values.end());
      } else {
        const auto code = encode(*codebook_, e.vector.values);
        codes_.insert(codes_.end(), code.begin(), code.end());
      }
      ++rows_;
    }
    by_id_.emplace(id, images_.size());
    images_.push_back(std::move(img));
  }

  void freeze() { frozen_ = true; }

  // Images ranked by ascending image distance, ties broken by image id.
  // `threads` > 1 splits the scan into contiguous chunks; results do not
  // depend on the thread count.
  std::vector<SearchHit> search(std::span<const ObjectEmbedding> query, int topk, unsigned threads = 1) const {
    require(frozen_, "index: freeze() before searching");
    require(topk >= 1, "index: topk must be >= 1");
    require(!query.empty(), "index: empty query");
    if (images_.empty()) throw InvalidArgument("index: empty index");
    for (const auto& q : query) require(q.vector.dim() == dim_, "index: query dimension mismatch");

    std::vector<AdcTable> tables;
    if (mode_ == IndexMode::ProductQuantized) {
      for (const auto& q : query) tables.emplace_back(*codebook_, q.vector.values);
    }
    std::vector<SearchHit> hits(images_.size());
    auto scan = [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) hits[i] = score_image(images_[i], query, tables);
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(images_.size())));
    if (threads == 1) {
      scan(0, images_.size());
    } else {
      std::vector<std::thread> pool;
      const std::size_t chunk = (images_.size() + threads - 1) / threads;
      for (unsigned t = 0; t < threads; ++t) {
        const std::size_t b = t * chunk, e = std::min(images_.size(), b + chunk);
        if (b < e) pool.emplace_back(scan, b, e);
      }
      for (auto& th : pool) th.join();
    }
    std::sort(hits.begin(), hits.end(), [](const SearchHit& a, const SearchHit& b) {
      if (a.distance != b.distance) return a.distance < b.distance;
      return a.image_id < b.image_id;
    });
    if (static_cast<int>(hits.size()) > topk) hits.resize(topk);
    return hits;
  }

  // Raw vector of row `r` (exact mode only).
  std::span<const float> row(std::size_t r) const {
    require(mode_ == IndexMode::Exact, "index: rows are only stored in exact mode");
    return {vectors_.data() + r * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const std::uint8_t> code(std::size_t r) const {
    require(mode_ == IndexMode::ProductQuantized, "index: codes are only stored in quantized mode");
    return {codes_.data() + r * codebook_->m, static_cast<std::size_t>(codebook_->m)};
  }

 private:
  friend void save_index(const std::string& path, const ObjectIndex& index);
  friend ObjectIndex load_index(const std::string& path);

  SearchHit score_image(const IndexedImage& img, std::span<const ObjectEmbedding> query,
                        const std::vector<AdcTable>& tables) const {
    SearchHit hit;
    hit.image_id = img.id;
    hit.distance = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < query.size(); ++i) {
      for (std::size_t j = 0; j < img.count(); ++j) {
        const std::size_t r = img.first + j;
        const double d = mode_ == IndexMode::Exact ? squared_distance(query[i].vector.values, row(r))
                                                   : tables[i].distance(code(r));
        if (d < hit.distance) {
          hit.distance = d;
          hit.query_index = static_cast<int>(i);
          hit.database_index = static_cast<int>(j);
        }
      }
    }
    return hit;
  }

  IndexMode mode_ = IndexMode::Exact;
  int dim_ = 0;
  int max_objects_ = kDefaultMaxObjects;
  bool frozen_ = false;
  std::size_t rows_ = 0;
  std::vector<IndexedImage> images_;
  std::map<std::string, std::size_t> by_id_;
  std::vector<float> vectors_;
  std::vector<std::uint8_t> codes_;
  std::optional<PQCodebook> codebook_;
  std::optional<WhiteningTransform> whitening_;
  std::string metadata_;
};

// Index file:
//   "OEIX" u16 version u8 mode u8 flags
//   u32 dim, u32 max_objects, u64 image_count, u64 embedding_count
//   u32 metadata length, metadata bytes (UTF-8 JSON)
//   per image: u16 id length, id bytes, u32 count, count x (4 x f32 box, f32 score)
//   exact: OETF f32 [embeddings, dim]
//   pq:    OETF f32 [m, k, dsub] codebook, then OETF u8 [embeddings, m] codes
//   flags bit 0 (whitening): OETF f32 [dim_in] mean, OETF f32 [dim_out, dim_in]
inline constexpr char kIndexMagic[4] = {'O', 'E', 'I', 'X'};
inline constexpr std::uint16_t kIndexVersion = 1;

inline void save_index(const std::string& path, const ObjectIndex& index) {
  using namespace oetf::io;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out.write(kIndexMagic, 4);
  put_le<std::uint16_t>(out, kIndexVersion);
  put_u8(out, static_cast<std::uint8_t>(index.mode_));
  put_u8(out, index.whitening_ ? 1 : 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dim_));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.max_objects_));
  put_le<std::uint64_t>(out, index.images_.size());
  put_le<std::uint64_t>(out, index.rows_);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.metadata_.size()));
  out.write(index.metadata_.data(), static_cast<std::streamsize>(index.metadata_.size()));
  for (const auto& img : index.images_) {
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(img.id.size()));
    out.write(img.id.data(), static_cast<std::streamsize>(img.id.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.count()));
    for (std::size_t j = 0; j < img.count(); ++j) {
      const Box& b = img.boxes[j];
      for (float v : {b.x1, b.y1, b.x2, b.y2, img.scores[j]}) put_f32(out, v);
    }
  }
  if (index.mode_ == IndexMode::Exact) {
    oetf::write(out, oetf::from_f32({index.rows_, static_cast<std::uint64_t>(index.dim_)}, index.vectors_));
  } else {
    const auto& cb = *index.codebook_;
    oetf::write(out, oetf::from_f32({static_cast<std::uint64_t>(cb.m), static_cast<std::uint64_t>(cb.k),
                                     static_cast<std::uint64_t>(cb.dsub)},
                                    cb.centroids));
    oetf::write(out, oetf::from_u8({index.rows_, static_cast<std::uint64_t>(cb.m)}, index.codes_));
  }
  if (index.whitening_) {
    const auto& w = *index.whitening_;
    oetf::write(out, oetf::from_f32({static_cast<std::uint64_t>(w.dim_in)}, w.mean));
    oetf::write(out, oetf::from_f32({static_cast<std::uint64_t>(w.dim_out), static_cast<std::uint64_t>(w.dim_in)},
                                    w.projection));
  }
  if (!out) throw Error("index: write failed for " + path);
}

// Loaded indexes come back frozen.
inline ObjectIndex load_index(const std::string& path) {
  using namespace oetf::io;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  read_exact(in, magic, 4);
  if (std::memcmp(magic, kIndexMagic, 4) != 0) throw FormatError("index: bad magic");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kIndexVersion) throw FormatError("index: unsupported version " + std::to_string(version));
  const auto mode = get_u8(in);
  if (mode > 1) throw FormatError("index: unknown mode " + std::to_string(mode));
  const auto flags = get_u8(in);
  if (flags > 1) throw FormatError("index: unknown flags");
  ObjectIndex idx;
  idx.mode_ = static_cast<IndexMode>(mode);
  idx.dim_ = static_cast<int>(get_le<std::uint32_t>(in));
  idx.max_objects_ = static_cast<int>(get_le<std::uint32_t>(in));
  const auto images = get_le<std::uint64_t>(in);
  const auto rows = get_le<std::uint64_t>(in);
  if (idx.dim_ < 1 || idx.max_objects_ < 1 || rows > images * static_cast<std::uint64_t>(idx.max_objects_)) {
    throw FormatError("index: inconsistent header");
  }
  const auto meta_len = get_le<std::uint32_t>(in);
  idx.metadata_.resize(meta_len);
  read_exact(in, idx.metadata_.data(), meta_len);
  for (std::uint64_t i = 0; i < images; ++i) {
    IndexedImage img;
    img.id.resize(get_le<std::uint16_t>(in));
    read_exact(in, img.id.data(), img.id.size());
    const auto count = get_le<std::uint32_t>(in);
    if (count < 1 || static_cast<int>(count) > idx.max_objects_) throw FormatError("index: bad object count");
    img.first = idx.rows_;
    for (std::uint32_t j = 0; j < count; ++j) {
      Box b;
      b.x1 = get_f32(in);
      b.y1 = get_f32(in);
      b.x2 = get_f32(in);
      b.y2 = get_f32(in);
      img.boxes.push_back(b);
      img.scores.push_back(get_f32(in));
    }
    idx.rows_ += count;
    if (!idx.by_id_.emplace(img.id, idx.images_.size()).second) throw FormatError("index: duplicate id");
    idx.images_.push_back(std::move(img));
  }
  if (idx.rows_ != rows) throw FormatError("index: embedding count mismatch");
  if (idx.mode_ == IndexMode::Exact) {
    auto t = oetf::read(in);
    if (t.dtype != oetf::DType::F32 || t.dims.size() != 2 || t.dims[0] != rows ||
        t.dims[1] != static_cast<std::uint64_t>(idx.dim_)) {
      throw FormatError("index: embedding block has wrong shape");
    }
    idx.vectors_ = std::move(t.f32);
  } else {
    auto cbt = oetf::read(in);
    if (cbt.dtype != oetf::DType::F32 || cbt.dims.size() != 3) throw FormatError("index: bad codebook block");
    PQCodebook cb;
    cb.m = static_cast<int>(cbt.dims[0]);
    cb.k = static_cast<int>(cbt.dims[1]);
    cb.dsub = static_cast<int>(cbt.dims[2]);
    cb.centroids = std::move(cbt.f32);
    if (cb.dim() != idx.dim_ || cb.k < 1 || cb.k > 256) throw FormatError("index: codebook/dim mismatch");
    auto codes = oetf::read(in);
    if (codes.dtype != oetf::DType::U8 || codes.dims.size() != 2 || codes.dims[0] != rows ||
        codes.dims[1] != static_cast<std::uint64_t>(cb.m)) {
      throw FormatError("index: code block has wrong shape");
    }
    for (auto c : codes.u8) {
      if (c >= cb.k) throw FormatError("index: code out of range");
    }
    idx.codes_ = std::move(codes.u8);
    idx.codebook_ = std::move(cb);
  }
  if (flags & 1) {
    auto mean = oetf::read(in);
    auto proj = oetf::read(in);
    if (mean.dtype != oetf::DType::F32 || mean.dims.size() != 1 || proj.dtype != oetf::DType::F32 ||
        proj.dims.size() != 2 || proj.dims[1] != mean.dims[0] || proj.dims[0] != static_cast<std::uint64_t>(idx.dim_)) {
      throw FormatError("index: bad whitening block");
    }
    WhiteningTransform w;
    w.dim_in = static_cast<int>(mean.dims[0]);
    w.dim_out = static_cast<int>(proj.dims[0]);
    w.mean = std::move(mean.f32);
    w.projection = std::move(proj.f32);
    idx.whitening_ = std::move(w);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("index: trailing bytes");
  idx.frozen_ = true;
  return idx;
}

}  // namespace sir
