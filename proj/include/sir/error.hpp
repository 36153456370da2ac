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

#include <stdexcept>
#include <string>

namespace sir {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition violations: wrong shapes, out-of-range parameters.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A normalization was requested on a vector with zero L2 norm.
class ZeroNormError : public Error {
 public:
  ZeroNormError() : Error("zero-norm descriptor") {}
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Corrupt, truncated or mismatched on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Mutation of a frozen index.
class FrozenError : public Error {
 public:
  FrozenError() : Error("index is frozen") {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace sir
