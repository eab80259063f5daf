// Copyright 2026 The mdembed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
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

namespace mdembed {

// Base class for every error raised by the library. The CLI maps
// InfeasibleError to exit code 3 and all other subclasses to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes, lengths or sizes that do not fit together.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// A numeric argument outside its admissible range.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A lookup index outside [0, n).
class IndexError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but carries no usable signal (all-zero spectra,
// zero matrix where a nonzero one is required).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// The request is valid but cannot be satisfied: too many blocks for a
// partition, a Bernoulli rate above one, a budget below the minimum.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

}  // namespace mdembed
