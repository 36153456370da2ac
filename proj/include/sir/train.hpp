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

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sir/error.hpp"
#include "sir/features.hpp"
#include "sir/oetf.hpp"
#include "sir/rng.hpp"
#include "sir/student.hpp"

namespace sir {

struct TrainConfig {
  double learning_rate = 1e-3;
  int batch_size = 8;
  int iterations = 2000;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const {
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning_rate must be > 0");
    require(batch_size >= 1, "train: batch_size must be >= 1");
    require(iterations >= 1, "train: iterations must be >= 1");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "train: betas must be in [0, 1)");
  }
};

// First and second moment estimates for one flat parameter vector.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

// Bias-corrected Adam update of `params` in place. Throws NumericError, and
// leaves everything untouched, if any gradient is non-finite.
template <class T>
void adam_step(std::span<T> params, std::span<const T> grads, AdamState& state, const TrainConfig& cfg) {
  require(params.size() == grads.size(), "adam: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(static_cast<double>(grads[i]))) {
      throw NumericError("adam: non-finite gradient at coordinate " + std::to_string(i));
    }
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  require(state.m.size() == params.size(), "adam: state size mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = static_cast<double>(grads[i]);
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] = static_cast<T>(static_cast<double>(params[i]) -
                               cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_eps));
  }
}

// Adam over every tensor of a student, one moment buffer per tensor.
template <class T>
struct StudentOptimizer {
  std::vector<AdamState> states;

  void step(StudentParams<T>& params, const StudentParams<T>& grads, const TrainConfig& cfg) {
    auto p = params.tensors();
    const auto g = grads.tensors();
    require(p.size() == g.size(), "optimizer: parameter/gradient structure mismatch");
    // Validate everything first so a bad gradient cannot half-apply an update.
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (T v : *g[i].second) {
        if (!std::isfinite(static_cast<double>(v))) {
          throw NumericError("adam: non-finite gradient in " + g[i].first);
        }
      }
    }
    if (states.empty()) states.resize(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      adam_step(std::span<T>(*p[i].second), std::span<const T>(*g[i].second), states[i], cfg);
    }
  }
};

struct TrainResult {
  StudentParams<float> params;
  std::vector<double> loss_curve;
};

// Mini-batch Adam on the mean-squared distillation loss. Batches are drawn
// from a seeded reshuffle of the dataset each epoch; the recorded loss of an
// iteration is the batch mean before that iteration's update.
inline TrainResult train_student(Variant variant, const std::vector<MultiScaleFeatures>& dataset,
                                 const TrainConfig& cfg) {
  cfg.validate();
  require(!dataset.empty(), "train_student: empty dataset");
  const auto shape = StudentShape::of(dataset.front());
  std::vector<StudentInputs<float>> inputs;
  std::vector<nn::Tensor3<float>> targets;
  inputs.reserve(dataset.size());
  for (const auto& f : dataset) {
    require(StudentShape::of(f) == shape && f.f2.same_shape(dataset.front().f2),
            "train_student: all examples must share one resolution");
    inputs.push_back(StudentInputs<float>::from(f));
    targets.push_back(nn::from_feature_map<float>(f.teacher));
  }

  TrainResult result;
  result.params = init_student<float>(variant, shape, cfg.seed);
  result.loss_curve.reserve(cfg.iterations);
  StudentOptimizer<float> opt;
  Rng rng(mix_seed(cfg.seed, 0xba7cULL));
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t cursor = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    auto batch_grad = result.params.zeros_like();
    auto acc = batch_grad.tensors();
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      const auto g = student_backward(result.params, inputs[idx], targets[idx]);
      batch_loss += g.loss;
      const auto parts = g.grad.tensors();
      for (std::size_t t = 0; t < acc.size(); ++t) {
        auto& dst = *acc[t].second;
        const auto& src = *parts[t].second;
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
    batch_loss /= cfg.batch_size;
    if (!std::isfinite(batch_loss)) {
      throw NumericError("train_student: loss diverged at iteration " + std::to_string(it));
    }
    const float inv = 1.f / static_cast<float>(cfg.batch_size);
    for (auto& [name, v] : acc) {
      for (auto& x : *v) x *= inv;
    }
    result.loss_curve.push_back(batch_loss);
    opt.step(result.params, batch_grad, cfg);
  }
  return result;
}

inline void write_loss_curve(const std::string& path, const std::vector<double>& curve) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path);
  out << "iteration,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, curve[i]);
    out << buf;
  }
}

// Checkpoint layout: <dir>/header.json lists variant, shape and tensors in
// order; each tensor is <dir>/<name>.oetf (rank 1, f32).
inline void save_checkpoint(const std::string& dir, const StudentParams<float>& p) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json header;
  header["format"] = "sir-student-checkpoint";
  header["version"] = 1;
  header["variant"] = to_string(p.variant);
  header["shape"] = {{"f2_channels", p.shape.f2_channels},
                     {"f3_channels", p.shape.f3_channels},
                     {"f4_channels", p.shape.f4_channels},
                     {"out_channels", p.shape.out_channels}};
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, v] : p.tensors()) {
    header["tensors"].push_back({{"name", name}, {"size", v->size()}, {"file", name + ".oetf"}});
    oetf::save((fs::path(dir) / (name + ".oetf")).string(), oetf::from_f32({v->size()}, *v));
  }
  std::ofstream out(fs::path(dir) / "header.json");
  out << header.dump(2) << "\n";
}

inline StudentParams<float> load_checkpoint(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "header.json");
  if (!in) throw Error("cannot open checkpoint header in " + dir);
  nlohmann::json header;
  try {
    in >> header;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("format", "") != "sir-student-checkpoint") throw FormatError("not a student checkpoint");
  StudentShape shape;
  const auto& s = header.at("shape");
  shape.f2_channels = s.at("f2_channels");
  shape.f3_channels = s.at("f3_channels");
  shape.f4_channels = s.at("f4_channels");
  shape.out_channels = s.at("out_channels");
  auto p = StudentParams<float>::zeros(parse_variant(header.at("variant")), shape);
  auto tensors = p.tensors();
  const auto& listed = header.at("tensors");
  if (listed.size() != tensors.size()) throw FormatError("checkpoint tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (listed[i].at("name") != tensors[i].first) throw FormatError("checkpoint tensor order mismatch");
    const auto t = oetf::load((fs::path(dir) / listed[i].at("file").get<std::string>()).string());
    if (t.dtype != oetf::DType::F32 || t.f32.size() != tensors[i].second->size()) {
      throw FormatError("checkpoint tensor " + tensors[i].first + " has wrong size");
    }
    *tensors[i].second = t.f32;
  }
  return p;
}

}  // namespace sir
