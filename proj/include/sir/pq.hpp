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
#include <limits>
#include <span>
#include <vector>

#include "sir/error.hpp"
#include "sir/rng.hpp"
#include "sir/tensor.hpp"

namespace sir {

inline constexpr int kDefaultPqSubspaces = 32;
inline constexpr int kDefaultPqCentroids = 256;

// Product quantizer: the vector is split into m contiguous sub-vectors of
// length dsub and each is replaced by the index of its nearest centroid, so a
// code is m bytes.
struct PQCodebook {
  int m = 0;
  int k = 0;
  int dsub = 0;
  std::vector<float> centroids;  // [m][k][dsub]

  int dim() const { return m * dsub; }
  const float* centroid(int sub, int c) const {
    return centroids.data() + (static_cast<std::size_t>(sub) * k + c) * dsub;
  }
  float* centroid(int sub, int c) { return centroids.data() + (static_cast<std::size_t>(sub) * k + c) * dsub; }
};

using PQCode = std::vector<std::uint8_t>;

namespace detail {

inline double sub_distance(const float* a, const float* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = double{a[i]} - b[i];
    s += d * d;
  }
  return s;
}

inline int nearest_centroid(const PQCodebook& cb, int sub, const float* x, double* dist = nullptr) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c = 0; c < cb.k; ++c) {
    const double d = sub_distance(x, cb.centroid(sub, c), cb.dsub);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (dist != nullptr) *dist = best_d;
  return best;
}

}  // namespace detail

// Per-subspace k-means: k-means++ seeding, then Lloyd iterations until the
// assignment stops changing or `iters` is reached. Empty clusters keep their
// previous centroid, which keeps the distortion sequence non-increasing.
// `distortion`, when given, receives the mean squared quantization error
// measured after each assignment step.
inline PQCodebook train_pq(std::span<const Descriptor> samples, int m, int k, int iters, std::uint64_t seed,
                           std::vector<double>* distortion = nullptr) {
  require(m >= 1, "train_pq: m must be >= 1");
  require(k >= 1 && k <= 256, "train_pq: k must be in [1, 256]");
  require(iters >= 1, "train_pq: iters must be >= 1");
  require(!samples.empty(), "train_pq: no samples");
  require(samples.size() >= static_cast<std::size_t>(k), "train_pq: fewer samples than centroids");
  const int dim = samples.front().dim();
  require(dim % m == 0, "train_pq: dimension not divisible by m");
  for (const auto& s : samples) require(s.dim() == dim, "train_pq: samples differ in dimension");

  PQCodebook cb;
  cb.m = m;
  cb.k = k;
  cb.dsub = dim / m;
  cb.centroids.assign(static_cast<std::size_t>(m) * k * cb.dsub, 0.f);
  const std::size_t n = samples.size();
  auto sub = [&](std::size_t i, int s) { return samples[i].values.data() + static_cast<std::size_t>(s) * cb.dsub; };

  std::vector<std::vector<int>> assign(m, std::vector<int>(n, -1));
  std::vector<double> sub_cost(m, 0.0);
  std::vector<std::vector<double>> history(m);

  for (int s = 0; s < m; ++s) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(s)));
    // k-means++ seeding.
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::size_t first = static_cast<std::size_t>(rng.below(n));
    std::copy_n(sub(first, s), cb.dsub, cb.centroid(s, 0));
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], detail::sub_distance(sub(i, s), cb.centroid(s, c - 1), cb.dsub));
        total += d2[i];
      }
      std::size_t pick = 0;
      if (total > 0.0) {
        double r = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          r -= d2[i];
          if (r < 0.0 && d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
        while (d2[pick] == 0.0 && pick > 0) --pick;
      } else {
        pick = static_cast<std::size_t>(rng.below(n));
      }
      std::copy_n(sub(pick, s), cb.dsub, cb.centroid(s, c));
    }

    // Lloyd iterations.
    std::vector<double> sums(static_cast<std::size_t>(k) * cb.dsub);
    std::vector<std::size_t> counts(k);
    for (int it = 0; it < iters; ++it) {
      bool changed = false;
      double cost = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = 0.0;
        const int a = detail::nearest_centroid(cb, s, sub(i, s), &d);
        cost += d;
        if (a != assign[s][i]) {
          assign[s][i] = a;
          changed = true;
        }
      }
      history[s].push_back(cost);
      if (!changed && it > 0) break;
      std::fill(sums.begin(), sums.end(), 0.0);
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t i = 0; i < n; ++i) {
        const int a = assign[s][i];
        ++counts[a];
        const float* x = sub(i, s);
        for (int j = 0; j < cb.dsub; ++j) sums[static_cast<std::size_t>(a) * cb.dsub + j] += x[j];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        float* dst = cb.centroid(s, c);
        for (int j = 0; j < cb.dsub; ++j) {
          dst[j] = static_cast<float>(sums[static_cast<std::size_t>(c) * cb.dsub + j] / counts[c]);
        }
      }
    }
  }

  if (distortion != nullptr) {
    std::size_t longest = 0;
    for (const auto& h : history) longest = std::max(longest, h.size());
    distortion->assign(longest, 0.0);
    for (std::size_t it = 0; it < longest; ++it) {
      double total = 0.0;
      for (const auto& h : history) total += h[std::min(it, h.size() - 1)];
      (*distortion)[it] = total / static_cast<double>(n);
    }
  }
  return cb;
}

inline PQCode encode(const PQCodebook& cb, std::span<const float> x) {
  require(static_cast<int>(x.size()) == cb.dim(), "pq encode: dimension mismatch");
  PQCode code(cb.m);
  for (int s = 0; s < cb.m; ++s) {
    code[s] = static_cast<std::uint8_t>(detail::nearest_centroid(cb, s, x.data() + static_cast<std::size_t>(s) * cb.dsub));
  }
  return code;
}

inline std::vector<float> decode(const PQCodebook& cb, std::span<const std::uint8_t> code) {
  require(static_cast<int>(code.size()) == cb.m, "pq decode: code length mismatch");
  std::vector<float> out(cb.dim());
  for (int s = 0; s < cb.m; ++s) {
    std::copy_n(cb.centroid(s, code[s]), cb.dsub, out.data() + static_cast<std::size_t>(s) * cb.dsub);
  }
  return out;
}

// Query-side lookup table: squared distance from each query sub-vector to
// every centroid of its subspace.
class AdcTable {
 public:
  AdcTable(const PQCodebook& cb, std::span<const float> q) : m_(cb.m), k_(cb.k), table_(static_cast<std::size_t>(cb.m) * cb.k) {
    require(static_cast<int>(q.size()) == cb.dim(), "adc: dimension mismatch");
    for (int s = 0; s < cb.m; ++s) {
      const float* qs = q.data() + static_cast<std::size_t>(s) * cb.dsub;
      for (int c = 0; c < cb.k; ++c) table_[static_cast<std::size_t>(s) * k_ + c] = detail::sub_distance(qs, cb.centroid(s, c), cb.dsub);
    }
  }

  double distance(std::span<const std::uint8_t> code) const {
    require(static_cast<int>(code.size()) == m_, "adc: code length mismatch");
    double s = 0.0;
    for (int i = 0; i < m_; ++i) s += table_[static_cast<std::size_t>(i) * k_ + code[i]];
    return s;
  }

 private:
  int m_;
  int k_;
  std::vector<double> table_;
};

inline double adc_distance(const PQCodebook& cb, std::span<const float> q, std::span<const std::uint8_t> code) {
  return AdcTable(cb, q).distance(code);
}

}  // namespace sir
