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
#include <span>
#include <vector>

#include "mdembed/core.hpp"

namespace mdembed {

// Block counts in [8, 16] are enough to see mixed-dimension effects on
// frequency-partitioned tables; 8 is the default.
struct BlockingConfig {
  std::size_t blocks = 8;
  static constexpr std::size_t kMinBlocks = 8;
  static constexpr std::size_t kMaxBlocks = 16;
};

// Empirical per-row (or per-object) frequencies.
struct FrequencyTable {
  std::vector<double> counts;

  double total() const;
  std::size_t nonzero() const;
  // Throws if empty, negative, non-finite or of zero mass.
  void validate() const;
};

// Indices ordered by descending frequency; ties keep ascending original index.
std::vector<std::size_t> sort_by_frequency(const FrequencyTable& freqs);

FrequencyTable permuted(const FrequencyTable& freqs, std::span<const std::size_t> order);

// Greedy threshold-crossing k-equipartition of a descending-sorted table.
// Returns k strictly increasing block start offsets with offsets[0] == 0.
// Cut q is placed at whichever side of the q*total/k crossing lies closer to
// the threshold (ties go to the earlier cut), clamped so every block keeps at
// least one nonzero entry.
std::vector<std::size_t> equipartition(const FrequencyTable& sorted, std::size_t k);

std::vector<std::size_t> sizes_from_offsets(std::span<const std::size_t> offsets, std::size_t total);

struct FrequencyPartition {
  std::vector<std::size_t> permutation;  // position -> original id index
  std::vector<std::size_t> offsets;
  std::vector<std::size_t> sizes;
  std::vector<double> masses;  // fraction of total mass per block
};

// sort_by_frequency followed by equipartition.
FrequencyPartition partition_by_frequency(const FrequencyTable& freqs, std::size_t k);

// p_i = sum_j pi_ij.
Vector block_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi);

// p_i = 1 / n_i: each block is a categorical feature queried once per lookup.
Vector feature_block_probabilities(std::span<const std::size_t> block_sizes);

// p_i = (sum_j pi_ij) / n_i: average query probability of a single row.
Vector row_average_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi);

enum class ProbabilityMode { kBlockMass, kRowAverage, kFeature };

Vector block_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi,
                           ProbabilityMode mode);

}  // namespace mdembed
