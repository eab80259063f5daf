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

#include <cstdint>

namespace mdembed {

// SplitMix64 used as a counter-based generator: the k-th draw of a stream
// with key `seed` is mix(seed + (k + 1) * 0x9E3779B97F4A7C15). Any
// reimplementation of `mix` below reproduces the same byte stream.
//
//   mix(z): z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//           z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//           return z ^ (z >> 31)
//
// uniform() = (next() >> 11) * 2^-53, in [0, 1).
// normal() uses Box-Muller on two consecutive uniforms (cosine branch only).
class Rng {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit Rng(std::uint64_t seed) : key_(seed) {}

  std::uint64_t next() {
    ++counter_;
    return mix(key_ + counter_ * kGamma);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound). Bound must be positive.
  std::uint64_t below(std::uint64_t bound);

  double normal();

  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Deterministic child seed for an independent stream, e.g. one per block
// or per sweep cell. Distinct (seed, stream) pairs give unrelated keys.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

}  // namespace mdembed
