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

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

namespace sir {

inline constexpr double kDefaultWhiteningEps = 1e-6;

// PCA whitening: y = projection * (x - mean). projection is dim_out x dim_in,
// row-major.
struct WhiteningTransform {
  int dim_in = 0;
  int dim_out = 0;
  std::vector<float> mean;
  std::vector<float> projection;

  static WhiteningTransform identity(int dim) {
    WhiteningTransform t;
    t.dim_in = t.dim_out = dim;
    t.mean.assign(dim, 0.f);
    t.projection.assign(static_cast<std::size_t>(dim) * dim, 0.f);
    for (int i = 0; i < dim; ++i) t.projection[static_cast<std::size_t>(i) * dim + i] = 1.f;
    return t;
  }
};

// Rows are the top-dim_out eigenvectors of the (1/N) sample covariance, each
// scaled by 1/sqrt(lambda + eps). Eigenvector signs are fixed so the largest
// magnitude component of each row is positive.
inline WhiteningTransform fit_whitening(std::span<const Descriptor> samples, int dim_out,
                                        double eps = kDefaultWhiteningEps) {
  require(samples.size() >= 2, "fit_whitening: need at least 2 samples");
  const int dim = samples.front().dim();
  require(dim >= 1, "fit_whitening: empty descriptors");
  require(dim_out >= 1 && dim_out <= dim, "fit_whitening: dim_out must be in [1, dim_in]");
  require(eps >= 0.0, "fit_whitening: eps must be >= 0");

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    require(s.dim() == dim, "fit_whitening: samples differ in dimension");
    for (int j = 0; j < dim; ++j) {
      if (!std::isfinite(s.values[j])) throw NumericError("fit_whitening: non-finite input");
      x(i, j) = s.values[j];
    }
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("fit_whitening: eigensolver failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();

  WhiteningTransform t;
  t.dim_in = dim;
  t.dim_out = dim_out;
  t.mean.resize(dim);
  for (int j = 0; j < dim; ++j) t.mean[j] = static_cast<float>(mu(j));
  t.projection.resize(static_cast<std::size_t>(dim_out) * dim);
  for (int k = 0; k < dim_out; ++k) {
    const Eigen::Index col = dim - 1 - k;
    Eigen::VectorXd v = vectors.col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    const double scale = 1.0 / std::sqrt(std::max(values(col), 0.0) + eps);
    if (!std::isfinite(scale)) throw NumericError("fit_whitening: singular spectrum, use eps > 0");
    for (int j = 0; j < dim; ++j) {
      t.projection[static_cast<std::size_t>(k) * dim + j] = static_cast<float>(v(j) * scale);
    }
  }
  return t;
}

// projection * (x - mean), without normalization.
inline std::vector<double> whiten_raw(const WhiteningTransform& t, std::span<const float> x) {
  require(static_cast<int>(x.size()) == t.dim_in, "apply_whitening: dimension mismatch");
  std::vector<double> centered(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) centered[j] = double{x[j]} - t.mean[j];
  std::vector<double> out(t.dim_out, 0.0);
  for (int k = 0; k < t.dim_out; ++k) {
    const float* row = t.projection.data() + static_cast<std::size_t>(k) * t.dim_in;
    double s = 0.0;
    for (int j = 0; j < t.dim_in; ++j) s += row[j] * centered[j];
    out[k] = s;
  }
  return out;
}

inline Descriptor apply_whitening(const WhiteningTransform& t, const Descriptor& d) {
  const auto raw = whiten_raw(t, d.values);
  return l2_normalized(std::span<const double>(raw));
}

}  // namespace sir
