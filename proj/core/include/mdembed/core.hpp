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
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mdembed/error.hpp"

namespace mdembed {

// Row-major so that embedding rows are contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Relative tolerance used for every numerical-rank decision.
inline constexpr double kRankTolerance = 1e-8;

// Dense k_W x k_V grid of per-block values, row-major.
template <class T>
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), cells_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return cells_.size(); }

  T& operator()(std::size_t i, std::size_t j) { return cells_[i * cols_ + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j]; }

  std::vector<T>& cells() { return cells_; }
  const std::vector<T>& cells() const { return cells_; }

  bool operator==(const BlockGrid&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> cells_;
};

using RankGrid = BlockGrid<std::size_t>;

std::size_t grid_total(const RankGrid& grid);
std::vector<std::size_t> grid_row_sums(const RankGrid& grid);
std::vector<std::size_t> grid_col_sums(const RankGrid& grid);

// Start offset of each block given block sizes: t_0 = 0, t_{i+1} = t_i + n_i.
std::vector<std::size_t> offsets_from_sizes(std::span<const std::size_t> sizes);

// Row and column partition of an n x m matrix into contiguous blocks.
class BlockStructure {
 public:
  BlockStructure() = default;
  BlockStructure(std::vector<std::size_t> row_sizes, std::vector<std::size_t> col_sizes);

  const std::vector<std::size_t>& row_sizes() const { return row_sizes_; }
  const std::vector<std::size_t>& col_sizes() const { return col_sizes_; }
  const std::vector<std::size_t>& row_offsets() const { return row_offsets_; }
  const std::vector<std::size_t>& col_offsets() const { return col_offsets_; }

  std::size_t rows() const { return n_; }
  std::size_t cols() const { return m_; }
  std::size_t row_blocks() const { return row_sizes_.size(); }
  std::size_t col_blocks() const { return col_sizes_.size(); }

  std::size_t row_block_of(std::size_t row) const;
  std::size_t col_block_of(std::size_t col) const;

  bool operator==(const BlockStructure& other) const {
    return row_sizes_ == other.row_sizes_ && col_sizes_ == other.col_sizes_;
  }

 private:
  std::vector<std::size_t> row_sizes_;
  std::vector<std::size_t> col_sizes_;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_offsets_;
  std::size_t n_ = 0;
  std::size_t m_ = 0;
};

// Block sampling probabilities. Input is normalized to unit mass on
// construction; the pre-normalization mass is kept in original_sum().
class ProbabilityMatrix {
 public:
  ProbabilityMatrix() = default;
  explicit ProbabilityMatrix(Eigen::MatrixXd pi);

  // Every entry of the target equally likely: pi_ij = n_i m_j / (n m).
  static ProbabilityMatrix uniform(const BlockStructure& structure);

  const Eigen::MatrixXd& matrix() const { return pi_; }
  double operator()(std::size_t i, std::size_t j) const { return pi_(i, j); }
  std::size_t rows() const { return static_cast<std::size_t>(pi_.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(pi_.cols()); }
  double original_sum() const { return original_sum_; }

  // Sum over column blocks for each row block, and vice versa.
  Vector row_mass() const { return pi_.rowwise().sum(); }
  Vector col_mass() const { return pi_.colwise().sum().transpose(); }

  // Smallest per-row or per-column marginal sampling rate:
  // min{ min_i (1/n_i) sum_j pi_ij, min_j (1/m_j) sum_i pi_ij }.
  double min_marginal(const BlockStructure& structure) const;

  void check_shape(const BlockStructure& structure) const;

 private:
  Eigen::MatrixXd pi_;
  double original_sum_ = 0.0;
};

// Per-block embedding dimensions lifted to a shared base dimension.
struct MDLayout {
  std::vector<double> dims;
  std::size_t base_dim = 0;
  std::optional<std::int64_t> budget;
  double temperature = 0.0;
  double scale = 0.0;

  bool integral() const;
  // Throws StructuralError if any dim is not a whole number >= 1.
  std::vector<std::size_t> int_dims() const;

  bool operator==(const MDLayout&) const = default;
};

// sum_i n_i d_i + sum_{i : d_i < base} d_i * base. Dims must be integral.
std::int64_t param_count(const MDLayout& layout, std::span<const std::size_t> block_sizes);
std::int64_t param_count(const MDLayout& layout, const BlockStructure& structure);

// Embedding blocks E_i (n_i x d_i) with projections P_i (d_i x base_dim).
// An empty optional stands for the identity map when d_i == base_dim.
struct MDEmbeddingLayer {
  std::vector<Matrix> blocks;
  std::vector<std::optional<Matrix>> projections;
  std::vector<std::size_t> offsets;
  std::size_t base_dim = 0;

  std::size_t block_count() const { return blocks.size(); }
  std::size_t rows() const;
  std::vector<std::size_t> block_sizes() const;
  std::vector<std::size_t> dims() const;

  // Throws StructuralError if shapes or offsets disagree.
  void validate() const;
};

// Dense target matrix together with its block partition and block ranks.
struct TargetBlockMatrix {
  Matrix data;
  BlockStructure structure;
  RankGrid block_ranks;
  std::size_t rank = 0;
  bool rank_additive = false;

  Eigen::Block<const Matrix> block(std::size_t i, std::size_t j) const;
  Eigen::Block<Matrix> block(std::size_t i, std::size_t j);
};

struct Observation {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;

  bool operator==(const Observation&) const = default;
};

struct ObservationSet {
  std::vector<Observation> entries;
  double expected_count = 0.0;
  std::uint64_t seed = 0;
};

// Per-block factors W^(ij) (n_i x r_ij), V^(ij) (m_j x r_ij) and, once
// assembled, the row/column embedding blocks with their 0/1 projections.
struct FactorPair {
  BlockGrid<Matrix> row_factors;
  BlockGrid<Matrix> col_factors;
  RankGrid ranks;
  std::size_t total_rank = 0;

  std::vector<Matrix> row_blocks;
  std::vector<Matrix> col_blocks;
  std::vector<Matrix> row_projections;
  std::vector<Matrix> col_projections;

  bool assembled() const { return !row_blocks.empty(); }
};

struct PowerFit {
  double rho = 0.0;
  double beta = 0.0;
  double residual = 0.0;  // RMS residual of log(sigma) about the fit
};

// Descending singular values per block, with an optional power-law fit.
struct SpectralProfile {
  BlockGrid<std::vector<double>> sigma;
  BlockGrid<std::optional<PowerFit>> fits;
};

struct BlockDiagnostics {
  BlockGrid<double> incoherence;
  BlockGrid<double> condition;
  BlockGrid<double> aspect;
};

}  // namespace mdembed
