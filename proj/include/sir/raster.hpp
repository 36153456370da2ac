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
#include <fstream>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/hog.hpp"
#include "sir/oetf.hpp"

namespace sir {

// 8-bit RGB raster, row-major, interleaved.
struct Raster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  Raster() = default;
  Raster(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::size_t offset(int y, int x) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  std::uint8_t* px(int y, int x) { return pixels.data() + offset(y, x); }
  const std::uint8_t* px(int y, int x) const { return pixels.data() + offset(y, x); }
  bool same_pixel(const Raster& o, int y, int x) const {
    const auto* a = px(y, x);
    const auto* b = o.px(y, x);
    return a[0] == b[0] && a[1] == b[1] && a[2] == b[2];
  }
  friend bool operator==(const Raster&, const Raster&) = default;
};

// Binary mask, one byte per pixel (0 or 1).
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto b : bits) n += b != 0;
    return n;
  }
  bool same_dims(const BinaryMask& o) const { return width == o.width && height == o.height; }
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline GrayImage to_gray(const Raster& r) {
  GrayImage g(r.width, r.height);
  for (int y = 0; y < r.height; ++y) {
    for (int x = 0; x < r.width; ++x) {
      const auto* p = r.px(y, x);
      g.at(y, x) = static_cast<float>((0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]) / 255.0);
    }
  }
  return g;
}

// Rasters persist as rank-3 u8 OETF [height, width, 3]; masks as rank-2.
inline oetf::Tensor to_tensor(const Raster& r) {
  return oetf::from_u8({static_cast<std::uint64_t>(r.height), static_cast<std::uint64_t>(r.width), 3},
                       r.pixels);
}

inline Raster raster_from_tensor(const oetf::Tensor& t) {
  if (t.dtype != oetf::DType::U8 || t.dims.size() != 3 || t.dims[2] != 3) {
    throw FormatError("expected rank-3 u8 raster tensor");
  }
  Raster r;
  r.height = static_cast<int>(t.dims[0]);
  r.width = static_cast<int>(t.dims[1]);
  r.pixels = t.u8;
  return r;
}

inline oetf::Tensor to_tensor(const BinaryMask& m) {
  return oetf::from_u8({static_cast<std::uint64_t>(m.height), static_cast<std::uint64_t>(m.width)},
                       m.bits);
}

inline BinaryMask mask_from_tensor(const oetf::Tensor& t) {
  if (t.dtype != oetf::DType::U8 || t.dims.size() != 2) throw FormatError("expected rank-2 u8 mask");
  BinaryMask m;
  m.height = static_cast<int>(t.dims[0]);
  m.width = static_cast<int>(t.dims[1]);
  m.bits = t.u8;
  return m;
}

inline void save_raster(const std::string& path, const Raster& r) { oetf::save(path, to_tensor(r)); }
inline Raster load_raster(const std::string& path) { return raster_from_tensor(oetf::load(path)); }
inline void save_mask(const std::string& path, const BinaryMask& m) { oetf::save(path, to_tensor(m)); }
inline BinaryMask load_mask(const std::string& path) { return mask_from_tensor(oetf::load(path)); }

// Portable pixel-map exports for inspection.
inline void write_ppm(const std::string& path, const Raster& r) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << "P6\n" << r.width << " " << r.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(r.pixels.data()), static_cast<std::streamsize>(r.pixels.size()));
}

inline void write_pgm(const std::string& path, const BinaryMask& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  for (auto b : m.bits) out.put(static_cast<char>(b ? 255 : 0));
}

}  // namespace sir
