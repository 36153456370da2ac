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
#include <optional>
#include <type_traits>
#include <string>
#include <utility>
#include <vector>

#include "sir/error.hpp"
#include "sir/features.hpp"
#include "sir/nn.hpp"
#include "sir/rng.hpp"
#include "sir/tensor.hpp"

namespace sir {

// S1: five bottlenecks on f2, no guidance.
// S2: three bottlenecks on f2, no guidance.
// S3: three bottlenecks on f2 with f3/f4 added after the first two.
enum class Variant { S1, S2, S3 };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::S1: return "S1";
    case Variant::S2: return "S2";
    case Variant::S3: return "S3";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "S1" || s == "s1") return Variant::S1;
  if (s == "S2" || s == "s2") return Variant::S2;
  if (s == "S3" || s == "s3") return Variant::S3;
  throw InvalidArgument("unknown student variant '" + s + "'");
}

// Channel counts of the pyramid inputs and of the distillation target.
struct StudentShape {
  int f2_channels = kF2Channels;
  int f3_channels = kF3Channels;
  int f4_channels = kF4Channels;
  int out_channels = kTeacherChannels;

  static StudentShape of(const MultiScaleFeatures& f) {
    return {f.f2.channels(), f.f3.channels(), f.f4.channels(), f.teacher.channels()};
  }
  friend bool operator==(const StudentShape&, const StudentShape&) = default;
};

// 1x1 reduce -> 3x3 (strided) -> 1x1 expand, rectified after each stage; the
// expand output is summed with the shortcut before its rectification.
template <class T>
struct Bottleneck {
  nn::Conv2d<T> reduce;
  nn::Conv2d<T> mid;
  nn::Conv2d<T> expand;
  std::optional<nn::Conv2d<T>> shortcut;  // 1x1 projection when shapes differ

  Bottleneck() = default;
  Bottleneck(int in, int out, int stride) {
    const int inner = std::max(1, out / 4);
    reduce = nn::Conv2d<T>(in, inner, 1, 1, true);
    mid = nn::Conv2d<T>(inner, inner, 3, stride, true);
    expand = nn::Conv2d<T>(inner, out, 1, 1, true);
    if (in != out || stride != 1) shortcut = nn::Conv2d<T>(in, out, 1, stride, false);
  }
};

template <class T>
struct StudentParams {
  Variant variant = Variant::S3;
  StudentShape shape;
  std::vector<Bottleneck<T>> blocks;
  std::optional<nn::Conv2d<T>> proj3;  // f3 -> block 0 output channels
  std::optional<nn::Conv2d<T>> proj4;  // f4 -> block 1 output channels

  // All parameters zero; geometry fixed by (variant, shape).
  static StudentParams zeros(Variant variant, const StudentShape& shape) {
    StudentParams p;
    p.variant = variant;
    p.shape = shape;
    p.blocks.emplace_back(shape.f2_channels, shape.f3_channels, 2);
    p.blocks.emplace_back(shape.f3_channels, shape.f4_channels, 2);
    const int tail = variant == Variant::S1 ? 3 : 1;
    for (int i = 0; i < tail; ++i) p.blocks.emplace_back(i == 0 ? shape.f4_channels : shape.out_channels,
                                                        shape.out_channels, 1);
    if (variant == Variant::S3) {
      p.proj3 = nn::Conv2d<T>(shape.f3_channels, shape.f3_channels, 1, 1, false);
      p.proj4 = nn::Conv2d<T>(shape.f4_channels, shape.f4_channels, 1, 1, false);
    }
    return p;
  }

  StudentParams zeros_like() const { return zeros(variant, shape); }

  // Named views of every parameter tensor, in a fixed order.
  template <class Self>
  static auto tensors_of(Self& self) {
    using Vec = std::conditional_t<std::is_const_v<Self>, const std::vector<T>, std::vector<T>>;
    std::vector<std::pair<std::string, Vec*>> out;
    auto conv = [&](const std::string& name, auto& c) {
      out.emplace_back(name + ".weight", &c.weight);
      if (c.has_bias) out.emplace_back(name + ".bias", &c.bias);
    };
    for (std::size_t i = 0; i < self.blocks.size(); ++i) {
      auto& b = self.blocks[i];
      const std::string prefix = "block" + std::to_string(i);
      conv(prefix + ".reduce", b.reduce);
      conv(prefix + ".mid", b.mid);
      conv(prefix + ".expand", b.expand);
      if (b.shortcut) conv(prefix + ".shortcut", *b.shortcut);
    }
    if (self.proj3) conv("guide3", *self.proj3);
    if (self.proj4) conv("guide4", *self.proj4);
    return out;
  }
  auto tensors() { return tensors_of(*this); }
  auto tensors() const { return tensors_of(*this); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, v] : tensors()) n += v->size();
    return n;
  }

  template <class U>
  StudentParams<U> cast() const {
    auto out = StudentParams<U>::zeros(variant, shape);
    auto src = tensors();
    auto dst = out.tensors();
    for (std::size_t i = 0; i < src.size(); ++i) {
      for (std::size_t j = 0; j < src[i].second->size(); ++j) {
        (*dst[i].second)[j] = static_cast<U>((*src[i].second)[j]);
      }
    }
    return out;
  }
};

// He-style fan-in initialization; biases start at zero.
template <class T>
StudentParams<T> init_student(Variant variant, const StudentShape& shape, std::uint64_t seed) {
  auto p = StudentParams<T>::zeros(variant, shape);
  Rng rng(mix_seed(seed, 0x57d7ULL));
  auto fill = [&](nn::Conv2d<T>& c) {
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(c.kernel) * c.kernel * c.in_channels));
    for (auto& w : c.weight) w = static_cast<T>(rng.normal() * std_dev);
  };
  for (auto& b : p.blocks) {
    fill(b.reduce);
    fill(b.mid);
    fill(b.expand);
    if (b.shortcut) fill(*b.shortcut);
  }
  if (p.proj3) fill(*p.proj3);
  if (p.proj4) fill(*p.proj4);
  return p;
}

template <class T>
struct StudentInputs {
  nn::Tensor3<T> f2;
  nn::Tensor3<T> f3;
  nn::Tensor3<T> f4;

  static StudentInputs from(const MultiScaleFeatures& f) {
    return {nn::from_feature_map<T>(f.f2), nn::from_feature_map<T>(f.f3), nn::from_feature_map<T>(f.f4)};
  }
};

namespace detail {

template <class T>
struct BlockTape {
  nn::Tensor3<T> input;
  nn::Tensor3<T> h1;
  nn::Tensor3<T> h2;
  nn::Tensor3<T> out;
};

template <class T>
nn::Tensor3<T> bottleneck_forward(const Bottleneck<T>& b, const nn::Tensor3<T>& x, BlockTape<T>* tape) {
  auto h1 = nn::conv_forward(b.reduce, x);
  nn::relu_inplace(h1);
  auto h2 = nn::conv_forward(b.mid, h1);
  nn::relu_inplace(h2);
  auto out = nn::conv_forward(b.expand, h2);
  if (b.shortcut) {
    nn::add_inplace(out, nn::conv_forward(*b.shortcut, x));
  } else {
    nn::add_inplace(out, x);
  }
  nn::relu_inplace(out);
  if (tape != nullptr) {
    tape->input = x;
    tape->h1 = std::move(h1);
    tape->h2 = std::move(h2);
    tape->out = out;
  }
  return out;
}

// Returns dL/dinput when `want_input_grad`.
template <class T>
nn::Tensor3<T> bottleneck_backward(const Bottleneck<T>& b, const BlockTape<T>& tape, nn::Tensor3<T> d_out,
                                   Bottleneck<T>& g, bool want_input_grad) {
  nn::relu_backward_inplace(tape.out, d_out);
  nn::Tensor3<T> d_h2, d_h1, d_x;
  nn::conv_backward(b.expand, tape.h2, d_out, g.expand, &d_h2);
  nn::relu_backward_inplace(tape.h2, d_h2);
  nn::conv_backward(b.mid, tape.h1, d_h2, g.mid, &d_h1);
  nn::relu_backward_inplace(tape.h1, d_h1);
  nn::conv_backward(b.reduce, tape.input, d_h1, g.reduce, want_input_grad ? &d_x : nullptr);
  if (b.shortcut) {
    nn::Tensor3<T> d_short;
    nn::conv_backward(*b.shortcut, tape.input, d_out, *g.shortcut, want_input_grad ? &d_short : nullptr);
    if (want_input_grad) nn::add_inplace(d_x, d_short);
  } else if (want_input_grad) {
    nn::add_inplace(d_x, d_out);
  }
  return d_x;
}

template <class T>
const nn::Tensor3<T>* guidance_input(const StudentParams<T>& p, const StudentInputs<T>& in, std::size_t block,
                                     const nn::Conv2d<T>** proj) {
  if (p.variant != Variant::S3) return nullptr;
  if (block == 0 && p.proj3) {
    *proj = &*p.proj3;
    return &in.f3;
  }
  if (block == 1 && p.proj4) {
    *proj = &*p.proj4;
    return &in.f4;
  }
  return nullptr;
}

}  // namespace detail

template <class T>
struct StudentTape {
  std::vector<detail::BlockTape<T>> blocks;
  nn::Tensor3<T> output;
};

template <class T>
nn::Tensor3<T> student_forward(const StudentParams<T>& p, const StudentInputs<T>& in,
                               StudentTape<T>* tape = nullptr) {
  require(in.f2.channels == p.shape.f2_channels && in.f3.channels == p.shape.f3_channels &&
              in.f4.channels == p.shape.f4_channels,
          "student_forward: input channels do not match parameters");
  if (tape != nullptr) tape->blocks.assign(p.blocks.size(), {});
  nn::Tensor3<T> y = in.f2;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    y = detail::bottleneck_forward(p.blocks[i], y, tape != nullptr ? &tape->blocks[i] : nullptr);
    const nn::Conv2d<T>* proj = nullptr;
    if (const auto* guide = detail::guidance_input(p, in, i, &proj)) {
      auto g = nn::conv_forward(*proj, *guide);
      if (!g.same_shape(y)) throw InvalidArgument("student_forward: guidance shape mismatch");
      nn::add_inplace(y, g);
    }
  }
  if (tape != nullptr) tape->output = y;
  return y;
}

inline FeatureMap student_forward(const StudentParams<float>& p, const MultiScaleFeatures& f) {
  const auto out = student_forward(p, StudentInputs<float>::from(f));
  return nn::to_feature_map(out, f.teacher.stride());
}

// Mean squared difference over every cell and channel.
template <class T>
T distill_loss(const nn::Tensor3<T>& student, const nn::Tensor3<T>& teacher) {
  require(student.same_shape(teacher), "distill_loss: shape mismatch");
  T s = T(0);
  for (std::size_t i = 0; i < student.values.size(); ++i) {
    const T d = student.values[i] - teacher.values[i];
    s += d * d;
  }
  return s / static_cast<T>(student.values.size());
}

inline double distill_loss(const FeatureMap& student, const FeatureMap& teacher) {
  require(student.same_shape(teacher), "distill_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < student.data().size(); ++i) {
    const double d = double{student.data()[i]} - teacher.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(student.data().size());
}

template <class T>
struct StudentGradient {
  T loss = T(0);
  StudentParams<T> grad;
};

// Exact reverse-mode gradient of distill_loss(student_forward(p, in), target).
template <class T>
StudentGradient<T> student_backward(const StudentParams<T>& p, const StudentInputs<T>& in,
                                    const nn::Tensor3<T>& target) {
  StudentTape<T> tape;
  const auto out = student_forward(p, in, &tape);
  require(out.same_shape(target), "student_backward: output/teacher shape mismatch");
  StudentGradient<T> result;
  result.loss = distill_loss(out, target);
  result.grad = p.zeros_like();

  nn::Tensor3<T> d(out.height, out.width, out.channels);
  const T scale = T(2) / static_cast<T>(out.values.size());
  for (std::size_t i = 0; i < d.values.size(); ++i) d.values[i] = scale * (out.values[i] - target.values[i]);

  for (std::size_t i = p.blocks.size(); i-- > 0;) {
    const nn::Conv2d<T>* proj = nullptr;
    if (const auto* guide = detail::guidance_input(p, in, i, &proj)) {
      auto& gproj = (i == 0) ? *result.grad.proj3 : *result.grad.proj4;
      nn::conv_backward(*proj, *guide, d, gproj, static_cast<nn::Tensor3<T>*>(nullptr));
    }
    d = detail::bottleneck_backward(p.blocks[i], tape.blocks[i], std::move(d), result.grad.blocks[i], i > 0);
  }
  return result;
}

// Sign pattern of every rectifier; two parameter settings with the same
// pattern lie in the same linear region of the network.
template <class T>
std::vector<bool> activation_pattern(const StudentParams<T>& p, const StudentInputs<T>& in) {
  StudentTape<T> tape;
  student_forward(p, in, &tape);
  std::vector<bool> bits;
  for (const auto& b : tape.blocks) {
    for (const auto* t : {&b.h1, &b.h2, &b.out}) {
      for (T v : t->values) bits.push_back(v > T(0));
    }
  }
  return bits;
}

// Multiply-adds of one forward pass for an f2 input of the given size.
template <class T>
std::size_t student_multiply_adds(const StudentParams<T>& p, int f2_height, int f2_width) {
  std::size_t total = 0;
  int h = f2_height, w = f2_width;
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    total += b.reduce.multiply_adds(h, w);
    total += b.mid.multiply_adds(h, w);
    const int oh = b.mid.out_extent(h), ow = b.mid.out_extent(w);
    total += b.expand.multiply_adds(oh, ow);
    if (b.shortcut) total += b.shortcut->multiply_adds(h, w);
    h = oh;
    w = ow;
    if (p.variant == Variant::S3 && i == 0 && p.proj3) total += p.proj3->multiply_adds(h, w);
    if (p.variant == Variant::S3 && i == 1 && p.proj4) total += p.proj4->multiply_adds(h, w);
  }
  return total;
}

}  // namespace sir
