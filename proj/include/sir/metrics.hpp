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

#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sir/error.hpp"
#include "sir/index.hpp"

namespace sir {

struct RankedEntry {
  std::string image_id;
  double distance = 0.0;
  friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

struct RankedList {
  std::string query_id;
  std::vector<RankedEntry> entries;

  static RankedList from_hits(std::string query_id, const std::vector<SearchHit>& hits) {
    RankedList l{std::move(query_id), {}};
    for (const auto& h : hits) l.entries.push_back({h.image_id, h.distance});
    return l;
  }

  // 1-based rank of `id`, or 0 when absent.
  std::size_t rank_of(const std::string& id) const {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (entries[i].image_id == id) return i + 1;
    }
    return 0;
  }

  void validate() const {
    std::set<std::string> seen;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      require(seen.insert(entries[i].image_id).second, "ranked list '" + query_id + "': duplicate id");
      require(i == 0 || entries[i - 1].distance <= entries[i].distance,
              "ranked list '" + query_id + "': distances must be non-decreasing");
    }
  }
  friend bool operator==(const RankedList&, const RankedList&) = default;
};

inline double recall_at_k(const std::vector<RankedList>& lists, const std::map<std::string, std::string>& gt,
                          std::size_t k) {
  require(k >= 1, "recall_at_k: k must be >= 1");
  require(!lists.empty(), "recall_at_k: no queries");
  std::size_t hits = 0;
  for (const auto& l : lists) {
    const auto it = gt.find(l.query_id);
    if (it == gt.end()) throw InvalidArgument("recall_at_k: query '" + l.query_id + "' missing from ground truth");
    const std::size_t r = l.rank_of(it->second);
    hits += r >= 1 && r <= k;
  }
  return static_cast<double>(hits) / static_cast<double>(lists.size());
}

inline double average_precision(const RankedList& l, const std::set<std::string>& relevant) {
  require(!relevant.empty(), "average_precision: empty relevant set");
  double sum = 0.0;
  std::size_t found = 0;
  for (std::size_t i = 0; i < l.entries.size(); ++i) {
    if (relevant.contains(l.entries[i].image_id)) {
      ++found;
      sum += static_cast<double>(found) / static_cast<double>(i + 1);
    }
  }
  return sum / static_cast<double>(relevant.size());
}

// Queries whose relevant set is empty or missing are skipped and counted in
// `skipped`; with nothing left to average the result is an error.
inline double mean_average_precision(const std::vector<RankedList>& lists,
                                     const std::map<std::string, std::set<std::string>>& gt_sets,
                                     std::size_t* skipped = nullptr) {
  double sum = 0.0;
  std::size_t used = 0, skip = 0;
  for (const auto& l : lists) {
    const auto it = gt_sets.find(l.query_id);
    if (it == gt_sets.end() || it->second.empty()) {
      ++skip;
      continue;
    }
    sum += average_precision(l, it->second);
    ++used;
  }
  if (skipped) *skipped = skip;
  require(used > 0, "mean_average_precision: no query has relevant items");
  return sum / static_cast<double>(used);
}

// Ranked lists as CSV: query_id,rank,image_id,distance with 1-based ranks.
// Distances use 17 significant digits so a read-back is bit-identical.
inline std::string rankings_csv(const std::vector<RankedList>& lists) {
  std::ostringstream o;
  o << "query_id,rank,image_id,distance\n";
  char buf[40];
  for (const auto& l : lists) {
    for (std::size_t i = 0; i < l.entries.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", l.entries[i].distance);
      o << l.query_id << ',' << i + 1 << ',' << l.entries[i].image_id << ',' << buf << '\n';
    }
  }
  return o.str();
}

inline std::vector<RankedList> parse_rankings_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "query_id,rank,image_id,distance") {
    throw FormatError("rankings: missing or unexpected header");
  }
  std::vector<RankedList> lists;
  std::map<std::string, std::size_t> slot;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw FormatError("rankings: line " + std::to_string(lineno) + " needs 4 fields");
    char* end = nullptr;
    const unsigned long rank = std::strtoul(f[1].c_str(), &end, 10);
    if (*end != '\0' || f[1].empty()) throw FormatError("rankings: bad rank on line " + std::to_string(lineno));
    const double d = std::strtod(f[3].c_str(), &end);
    if (*end != '\0' || f[3].empty()) throw FormatError("rankings: bad distance on line " + std::to_string(lineno));
    auto [it, fresh] = slot.try_emplace(f[0], lists.size());
    if (fresh) lists.push_back({f[0], {}});
    auto& l = lists[it->second];
    if (rank != l.entries.size() + 1) throw FormatError("rankings: ranks of '" + f[0] + "' are not consecutive");
    l.entries.push_back({f[2], d});
  }
  for (const auto& l : lists) l.validate();
  return lists;
}

inline void write_rankings_csv(const std::string& path, const std::vector<RankedList>& lists) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << rankings_csv(lists);
}

inline std::vector<RankedList> read_rankings_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rankings_csv(ss.str());
}

}  // namespace sir
