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

#include "mdembed/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace mdembed {

std::size_t grid_total(const RankGrid& grid) {
  return std::accumulate(grid.cells().begin(), grid.cells().end(), std::size_t{0});
}

std::vector<std::size_t> grid_row_sums(const RankGrid& grid) {
  std::vector<std::size_t> sums(grid.rows(), 0);
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) sums[i] += grid(i, j);
  return sums;
}

std::vector<std::size_t> grid_col_sums(const RankGrid& grid) {
  std::vector<std::size_t> sums(grid.cols(), 0);
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j) sums[j] += grid(i, j);
  return sums;
}

std::vector<std::size_t> offsets_from_sizes(std::span<const std::size_t> sizes) {
  std::vector<std::size_t> offsets(sizes.size(), 0);
  std::size_t t = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    offsets[i] = t;
    t += sizes[i];
  }
  return offsets;
}

namespace {

void check_sizes(const std::vector<std::size_t>& sizes, const char* what) {
  if (sizes.empty()) throw StructuralError(std::string(what) + ": at least one block required");
  for (std::size_t s : sizes)
    if (s == 0) throw StructuralError(std::string(what) + ": block sizes must be >= 1");
}

std::size_t block_of(const std::vector<std::size_t>& offsets, std::size_t total, std::size_t index) {
  if (index >= total) throw IndexError("index " + std::to_string(index) + " out of range [0, " +
                                       std::to_string(total) + ")");
  auto it = std::upper_bound(offsets.begin(), offsets.end(), index);
  return static_cast<std::size_t>(std::distance(offsets.begin(), it)) - 1;
}

}  // namespace

BlockStructure::BlockStructure(std::vector<std::size_t> row_sizes, std::vector<std::size_t> col_sizes)
    : row_sizes_(std::move(row_sizes)), col_sizes_(std::move(col_sizes)) {
  check_sizes(row_sizes_, "row blocks");
  check_sizes(col_sizes_, "column blocks");
  row_offsets_ = offsets_from_sizes(row_sizes_);
  col_offsets_ = offsets_from_sizes(col_sizes_);
  n_ = std::accumulate(row_sizes_.begin(), row_sizes_.end(), std::size_t{0});
  m_ = std::accumulate(col_sizes_.begin(), col_sizes_.end(), std::size_t{0});
}

std::size_t BlockStructure::row_block_of(std::size_t row) const {
  return block_of(row_offsets_, n_, row);
}

std::size_t BlockStructure::col_block_of(std::size_t col) const {
  return block_of(col_offsets_, m_, col);
}

ProbabilityMatrix::ProbabilityMatrix(Eigen::MatrixXd pi) : pi_(std::move(pi)) {
  if (pi_.size() == 0) throw StructuralError("probability matrix is empty");
  if (!pi_.allFinite()) throw DomainError("probability matrix has non-finite entries");
  if ((pi_.array() < 0.0).any()) throw DomainError("probability matrix has negative entries");
  original_sum_ = pi_.sum();
  if (!(original_sum_ > 0.0)) throw DomainError("probability matrix has zero total mass");
  pi_ /= original_sum_;
}

ProbabilityMatrix ProbabilityMatrix::uniform(const BlockStructure& structure) {
  Eigen::MatrixXd pi(structure.row_blocks(), structure.col_blocks());
  const double total = static_cast<double>(structure.rows()) * static_cast<double>(structure.cols());
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    for (std::size_t j = 0; j < structure.col_blocks(); ++j)
      pi(i, j) = static_cast<double>(structure.row_sizes()[i]) *
                 static_cast<double>(structure.col_sizes()[j]) / total;
  return ProbabilityMatrix(std::move(pi));
}

void ProbabilityMatrix::check_shape(const BlockStructure& structure) const {
  if (rows() != structure.row_blocks() || cols() != structure.col_blocks())
    throw StructuralError("probability matrix is " + std::to_string(rows()) + "x" +
                          std::to_string(cols()) + " but block structure is " +
                          std::to_string(structure.row_blocks()) + "x" +
                          std::to_string(structure.col_blocks()));
}

double ProbabilityMatrix::min_marginal(const BlockStructure& structure) const {
  check_shape(structure);
  const Vector rows_mass = row_mass();
  const Vector cols_mass = col_mass();
  double eps = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows(); ++i)
    eps = std::min(eps, rows_mass(i) / static_cast<double>(structure.row_sizes()[i]));
  for (std::size_t j = 0; j < cols(); ++j)
    eps = std::min(eps, cols_mass(j) / static_cast<double>(structure.col_sizes()[j]));
  return eps;
}

bool MDLayout::integral() const {
  return std::all_of(dims.begin(), dims.end(),
                     [](double d) { return d >= 1.0 && d == std::floor(d); });
}

std::vector<std::size_t> MDLayout::int_dims() const {
  if (!integral()) throw StructuralError("layout dims must be whole numbers >= 1; round them first");
  std::vector<std::size_t> out(dims.size());
  std::transform(dims.begin(), dims.end(), out.begin(),
                 [](double d) { return static_cast<std::size_t>(d); });
  return out;
}

std::int64_t param_count(const MDLayout& layout, std::span<const std::size_t> block_sizes) {
  if (layout.dims.size() != block_sizes.size())
    throw StructuralError("layout has " + std::to_string(layout.dims.size()) + " dims but there are " +
                          std::to_string(block_sizes.size()) + " blocks");
  const auto dims = layout.int_dims();
  const auto base = static_cast<std::int64_t>(layout.base_dim);
  std::int64_t total = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    const auto d = static_cast<std::int64_t>(dims[i]);
    total += static_cast<std::int64_t>(block_sizes[i]) * d;
    if (d < base) total += d * base;
  }
  return total;
}

std::int64_t param_count(const MDLayout& layout, const BlockStructure& structure) {
  return param_count(layout, structure.row_sizes());
}

std::size_t MDEmbeddingLayer::rows() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += static_cast<std::size_t>(b.rows());
  return n;
}

std::vector<std::size_t> MDEmbeddingLayer::block_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.reserve(blocks.size());
  for (const auto& b : blocks) sizes.push_back(static_cast<std::size_t>(b.rows()));
  return sizes;
}

std::vector<std::size_t> MDEmbeddingLayer::dims() const {
  std::vector<std::size_t> d;
  d.reserve(blocks.size());
  for (const auto& b : blocks) d.push_back(static_cast<std::size_t>(b.cols()));
  return d;
}

void MDEmbeddingLayer::validate() const {
  if (blocks.empty()) throw StructuralError("layer has no blocks");
  if (projections.size() != blocks.size() || offsets.size() != blocks.size())
    throw StructuralError("layer blocks, projections and offsets differ in length");
  std::size_t t = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto d = static_cast<std::size_t>(blocks[i].cols());
    if (blocks[i].rows() == 0) throw StructuralError("layer block " + std::to_string(i) + " is empty");
    if (offsets[i] != t) throw StructuralError("layer offsets are not cumulative block sizes");
    t += static_cast<std::size_t>(blocks[i].rows());
    if (d == 0 || d > base_dim)
      throw StructuralError("layer block " + std::to_string(i) + " has dim outside [1, base_dim]");
    if (projections[i]) {
      if (static_cast<std::size_t>(projections[i]->rows()) != d ||
          static_cast<std::size_t>(projections[i]->cols()) != base_dim)
        throw StructuralError("projection " + std::to_string(i) + " must be d_i x base_dim");
    } else if (d != base_dim) {
      throw StructuralError("identity projection requires d_i == base_dim at block " + std::to_string(i));
    }
  }
}

Eigen::Block<const Matrix> TargetBlockMatrix::block(std::size_t i, std::size_t j) const {
  return data.block(static_cast<Eigen::Index>(structure.row_offsets()[i]),
                    static_cast<Eigen::Index>(structure.col_offsets()[j]),
                    static_cast<Eigen::Index>(structure.row_sizes()[i]),
                    static_cast<Eigen::Index>(structure.col_sizes()[j]));
}

Eigen::Block<Matrix> TargetBlockMatrix::block(std::size_t i, std::size_t j) {
  return data.block(static_cast<Eigen::Index>(structure.row_offsets()[i]),
                    static_cast<Eigen::Index>(structure.col_offsets()[j]),
                    static_cast<Eigen::Index>(structure.row_sizes()[i]),
                    static_cast<Eigen::Index>(structure.col_sizes()[j]));
}

}  // namespace mdembed
