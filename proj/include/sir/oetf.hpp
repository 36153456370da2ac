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

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "sir/error.hpp"
#include "sir/tensor.hpp"

// OETF tensor container:
//   bytes 0-3  magic "OETF"
//   u16        version (1)
//   u8         dtype (0 = f32, 1 = u8)
//   u8         rank
//   rank x u64 dims
//   payload    row-major, little-endian
namespace sir::oetf {

inline constexpr char kMagic[4] = {'O', 'E', 'T', 'F'};
inline constexpr std::uint16_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 0, U8 = 1 };

struct Tensor {
  DType dtype = DType::F32;
  std::vector<std::uint64_t> dims;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1},
                           [](std::uint64_t a, std::uint64_t b) { return a * b; });
  }
};

namespace io {

inline void put_u8(std::ostream& out, std::uint8_t v) { out.put(static_cast<char>(v)); }

template <class U>
inline void put_le(std::ostream& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.put(static_cast<char>(static_cast<std::uint8_t>(v >> (8 * i))));
  }
}

inline void put_f32(std::ostream& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

inline void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("truncated input");
}

template <class U>
inline U get_le(std::istream& in) {
  std::uint8_t b[sizeof(U)];
  read_exact(in, b, sizeof(U));
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(b[i]) << (8 * i));
  return v;
}

inline std::uint8_t get_u8(std::istream& in) { return get_le<std::uint8_t>(in); }
inline float get_f32(std::istream& in) { return std::bit_cast<float>(get_le<std::uint32_t>(in)); }

}  // namespace io

inline void write(std::ostream& out, const Tensor& t) {
  const std::uint64_t n = t.element_count();
  if (t.dtype == DType::F32) require(t.f32.size() == n, "oetf: f32 payload size mismatch");
  if (t.dtype == DType::U8) require(t.u8.size() == n, "oetf: u8 payload size mismatch");
  require(t.dims.size() <= 255, "oetf: rank too large");
  out.write(kMagic, 4);
  io::put_le<std::uint16_t>(out, kVersion);
  io::put_u8(out, static_cast<std::uint8_t>(t.dtype));
  io::put_u8(out, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) io::put_le<std::uint64_t>(out, d);
  if (t.dtype == DType::F32) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(t.f32.data()),
                static_cast<std::streamsize>(t.f32.size() * sizeof(float)));
    } else {
      for (float v : t.f32) io::put_f32(out, v);
    }
  } else {
    out.write(reinterpret_cast<const char*>(t.u8.data()), static_cast<std::streamsize>(t.u8.size()));
  }
  if (!out) throw Error("oetf: write failed");
}

inline Tensor read(std::istream& in) {
  char magic[4];
  io::read_exact(in, magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("oetf: bad magic");
  const auto version = io::get_le<std::uint16_t>(in);
  if (version != kVersion) throw FormatError("oetf: unsupported version " + std::to_string(version));
  Tensor t;
  const auto dtype = io::get_u8(in);
  if (dtype > 1) throw FormatError("oetf: unknown dtype " + std::to_string(dtype));
  t.dtype = static_cast<DType>(dtype);
  const auto rank = io::get_u8(in);
  t.dims.resize(rank);
  for (auto& d : t.dims) d = io::get_le<std::uint64_t>(in);
  const std::uint64_t n = t.element_count();
  if (n > (std::uint64_t{1} << 34)) throw FormatError("oetf: implausible element count");
  const std::uint64_t payload = n * (t.dtype == DType::F32 ? 4 : 1);
  if (const auto here = in.tellg(); here >= 0) {
    in.seekg(0, std::ios::end);
    const auto end = in.tellg();
    in.seekg(here);
    if (end >= 0 && static_cast<std::uint64_t>(end - here) < payload) throw FormatError("truncated input");
  }
  if (t.dtype == DType::F32) {
    t.f32.resize(n);
    if constexpr (std::endian::native == std::endian::little) {
      io::read_exact(in, t.f32.data(), n * sizeof(float));
    } else {
      for (auto& v : t.f32) v = io::get_f32(in);
    }
  } else {
    t.u8.resize(n);
    io::read_exact(in, t.u8.data(), n);
  }
  return t;
}

inline std::uint64_t header_bytes(std::size_t rank) { return 8 + 8 * rank; }

inline void save(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  write(out, t);
}

inline Tensor load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return read(in);
}

inline Tensor from_f32(std::vector<std::uint64_t> dims, std::vector<float> values) {
  Tensor t;
  t.dtype = DType::F32;
  t.dims = std::move(dims);
  t.f32 = std::move(values);
  require(t.f32.size() == t.element_count(), "oetf: payload size mismatch");
  return t;
}

inline Tensor from_u8(std::vector<std::uint64_t> dims, std::vector<std::uint8_t> values) {
  Tensor t;
  t.dtype = DType::U8;
  t.dims = std::move(dims);
  t.u8 = std::move(values);
  require(t.u8.size() == t.element_count(), "oetf: payload size mismatch");
  return t;
}

// Feature maps are stored as rank-3 [height, width, channels]; the stride is
// not part of the container and must be supplied on load.
inline Tensor from_feature_map(const FeatureMap& fm) {
  return from_f32({static_cast<std::uint64_t>(fm.height()), static_cast<std::uint64_t>(fm.width()),
                   static_cast<std::uint64_t>(fm.channels())},
                  fm.data());
}

inline FeatureMap to_feature_map(const Tensor& t, float stride) {
  if (t.dtype != DType::F32 || t.dims.size() != 3) throw FormatError("oetf: expected rank-3 f32");
  return FeatureMap(static_cast<int>(t.dims[1]), static_cast<int>(t.dims[0]),
                    static_cast<int>(t.dims[2]), stride, t.f32);
}

}  // namespace sir::oetf
