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

#include "mdembed/blocking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mdembed {

double FrequencyTable::total() const { return std::accumulate(counts.begin(), counts.end(), 0.0); }

std::size_t FrequencyTable::nonzero() const {
  return static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }));
}

void FrequencyTable::validate() const {
  if (counts.empty()) throw StructuralError("frequency table is empty");
  for (double c : counts) {
    if (!std::isfinite(c) || c < 0.0) throw DomainError("frequencies must be finite and nonnegative");
  }
  if (!(total() > 0.0)) throw DomainError("frequency table has zero total mass");
}

std::vector<std::size_t> sort_by_frequency(const FrequencyTable& freqs) {
  if (freqs.counts.empty()) throw StructuralError("frequency table is empty");
  std::vector<std::size_t> order(freqs.counts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return freqs.counts[a] > freqs.counts[b]; });
  return order;
}

FrequencyTable permuted(const FrequencyTable& freqs, std::span<const std::size_t> order) {
  if (order.size() != freqs.counts.size()) throw StructuralError("permutation length mismatch");
  FrequencyTable out;
  out.counts.reserve(order.size());
  for (std::size_t idx : order) out.counts.push_back(freqs.counts.at(idx));
  return out;
}

std::vector<std::size_t> equipartition(const FrequencyTable& sorted, std::size_t k) {
  sorted.validate();
  if (k == 0) throw StructuralError("block count must be >= 1");
  const auto& f = sorted.counts;
  for (std::size_t i = 1; i < f.size(); ++i)
    if (f[i] > f[i - 1]) throw StructuralError("equipartition expects frequencies sorted descending");

  const std::size_t nz = sorted.nonzero();
  if (k > nz)
    throw InfeasibleError("cannot form " + std::to_string(k) + " nonempty blocks from " +
                          std::to_string(nz) + " nonzero frequencies");

  const std::size_t n = f.size();
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + f[i];
  const double total = prefix[n];

  std::vector<std::size_t> offsets{0};
  offsets.reserve(k);
  for (std::size_t q = 1; q < k; ++q) {
    const double threshold = total * static_cast<double>(q) / static_cast<double>(k);
    auto it = std::lower_bound(prefix.begin() + 1, prefix.end(), threshold);
    std::size_t cut = static_cast<std::size_t>(std::distance(prefix.begin(), it));
    cut = std::min(cut, n);
    if (cut > 1 && std::abs(prefix[cut - 1] - threshold) <= std::abs(prefix[cut] - threshold)) --cut;
    // Every later block must still start on a nonzero entry.
    const std::size_t lo = offsets.back() + 1;
    const std::size_t hi = nz - (k - q);
    cut = std::clamp(cut, lo, hi);
    offsets.push_back(cut);
  }
  return offsets;
}

std::vector<std::size_t> sizes_from_offsets(std::span<const std::size_t> offsets, std::size_t total) {
  std::vector<std::size_t> sizes(offsets.size());
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const std::size_t end = i + 1 < offsets.size() ? offsets[i + 1] : total;
    if (end <= offsets[i]) throw StructuralError("offsets must be strictly increasing and below total");
    sizes[i] = end - offsets[i];
  }
  return sizes;
}

FrequencyPartition partition_by_frequency(const FrequencyTable& freqs, std::size_t k) {
  freqs.validate();
  FrequencyPartition out;
  out.permutation = sort_by_frequency(freqs);
  const FrequencyTable sorted = permuted(freqs, out.permutation);
  out.offsets = equipartition(sorted, k);
  out.sizes = sizes_from_offsets(out.offsets, sorted.counts.size());
  const double total = sorted.total();
  for (std::size_t b = 0; b < k; ++b) {
    double mass = 0.0;
    for (std::size_t i = out.offsets[b]; i < out.offsets[b] + out.sizes[b]; ++i) mass += sorted.counts[i];
    out.masses.push_back(mass / total);
  }
  return out;
}

Vector block_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi) {
  pi.check_shape(structure);
  return pi.row_mass();
}

Vector feature_block_probabilities(std::span<const std::size_t> block_sizes) {
  if (block_sizes.empty()) throw StructuralError("no feature blocks");
  Vector p(static_cast<Eigen::Index>(block_sizes.size()));
  for (std::size_t i = 0; i < block_sizes.size(); ++i) {
    if (block_sizes[i] == 0) throw StructuralError("feature block " + std::to_string(i) + " has size 0");
    p(static_cast<Eigen::Index>(i)) = 1.0 / static_cast<double>(block_sizes[i]);
  }
  return p;
}

Vector row_average_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi) {
  Vector p = block_probabilities(structure, pi);
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    p(static_cast<Eigen::Index>(i)) /= static_cast<double>(structure.row_sizes()[i]);
  return p;
}

Vector block_probabilities(const BlockStructure& structure, const ProbabilityMatrix& pi,
                           ProbabilityMode mode) {
  switch (mode) {
    case ProbabilityMode::kBlockMass:
      return block_probabilities(structure, pi);
    case ProbabilityMode::kRowAverage:
      return row_average_probabilities(structure, pi);
    case ProbabilityMode::kFeature:
      return feature_block_probabilities(structure.row_sizes());
  }
  throw StructuralError("unknown probability mode");
}

}  // namespace mdembed
