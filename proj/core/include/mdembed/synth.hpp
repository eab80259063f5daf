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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "mdembed/core.hpp"

namespace mdembed {

// Requested singular values of a generated block.
struct SpectrumSpec {
  enum class Kind { kPower, kExplicit, kFlat };
  Kind kind = Kind::kFlat;
  double rho = 1.0;   // kPower: sigma_k = rho * k^-beta, k = 1..r
  double beta = 0.0;
  double level = 1.0;  // kFlat: every sigma_k = level
  std::vector<double> sigma;  // kExplicit

  static SpectrumSpec power(double rho, double beta) { return {Kind::kPower, rho, beta, 1.0, {}}; }
  static SpectrumSpec flat(double level) { return {Kind::kFlat, 1.0, 0.0, level, {}}; }
  static SpectrumSpec explicit_values(std::vector<double> sigma) {
    return {Kind::kExplicit, 1.0, 0.0, 1.0, std::move(sigma)};
  }

  // The r leading singular values; throws for malformed explicit lists.
  std::vector<double> values(std::size_t r) const;
};

struct SynthSpec {
  BlockStructure structure;
  RankGrid block_ranks;
  BlockGrid<SpectrumSpec> spectra;
  std::uint64_t seed = 0;
};

// U diag(sigma) V^T with U, V orthonormal from seeded QR draws.
Matrix gen_low_rank_block(std::size_t n, std::size_t m, std::size_t r, const SpectrumSpec& spectrum,
                          std::uint64_t seed);

// Block (i, j) = U_ij diag(sigma_ij) V_ij^T where the U_ij of one block row
// are mutually orthogonal column sets, and likewise the V_ij of one block
// column. Rank is exactly sum_ij r_ij and block singular values are exactly
// the requested ones. Requires sum_j r_ij <= n_i and sum_i r_ij <= m_j.
TargetBlockMatrix gen_rank_additive(const SynthSpec& spec);

struct TwoBlockParams {
  std::size_t rows_per_block = 150;
  std::size_t cols = 100;
  std::size_t popular_rank = 8;
  std::size_t rare_rank = 2;
  double eps = 0.1;
  std::uint64_t seed = 0;
  // Defaults to flat spectra scaled for unit RMS entries per block.
  std::optional<SpectrumSpec> popular_spectrum;
  std::optional<SpectrumSpec> rare_spectrum;
};

struct TwoBlockScenario {
  TargetBlockMatrix target;
  ProbabilityMatrix pi;  // (1 - eps, eps)
};

// Vertically stacked popular and rare blocks.
TwoBlockScenario gen_two_block_scenario(const TwoBlockParams& params);

// Popular-block rank of about 1 / eps.
std::size_t popular_rank_for(double eps);

}  // namespace mdembed
