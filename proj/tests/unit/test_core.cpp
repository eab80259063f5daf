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

#include <algorithm>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "mdembed/core.hpp"
#include "mdembed/rng.hpp"

namespace {

using namespace mdembed;

MDLayout layout_of(std::vector<double> dims, std::size_t base) {
  MDLayout l;
  l.dims = std::move(dims);
  l.base_dim = base;
  return l;
}

// Counts parameters entry by entry: every embedding cell plus every
// projection cell that actually has to be stored.
std::int64_t count_cells(const std::vector<std::size_t>& dims, std::size_t base, const std::vector<std::size_t>& n) {
  std::int64_t total = 0;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    for (std::size_t r = 0; r < n[i]; ++r)
      for (std::size_t c = 0; c < dims[i]; ++c) ++total;
    if (dims[i] != base)
      for (std::size_t r = 0; r < dims[i]; ++r)
        for (std::size_t c = 0; c < base; ++c) ++total;
  }
  return total;
}

TEST(BlockStructure, OffsetsAndTotals) {
  BlockStructure s({3, 5, 2}, {4, 1});
  EXPECT_EQ(s.rows(), 10u);
  EXPECT_EQ(s.cols(), 5u);
  EXPECT_EQ(s.row_offsets(), (std::vector<std::size_t>{0, 3, 8}));
  EXPECT_EQ(s.col_offsets(), (std::vector<std::size_t>{0, 4}));
  EXPECT_EQ(s.row_block_of(0), 0u);
  EXPECT_EQ(s.row_block_of(2), 0u);
  EXPECT_EQ(s.row_block_of(3), 1u);
  EXPECT_EQ(s.row_block_of(9), 2u);
  EXPECT_EQ(s.col_block_of(4), 1u);
  EXPECT_THROW(s.row_block_of(10), IndexError);
}

TEST(BlockStructure, RejectsEmptyOrZeroBlocks) {
  EXPECT_THROW(BlockStructure({}, {1}), StructuralError);
  EXPECT_THROW(BlockStructure({1, 0}, {1}), StructuralError);
  EXPECT_THROW(BlockStructure({1}, {}), StructuralError);
}

TEST(BlockStructure, OffsetsStrictlyIncreaseAndEndAtTotal) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(6));
    for (auto& s : sizes) s = 1 + rng.below(20);
    BlockStructure st(sizes, {1});
    const auto& t = st.row_offsets();
    for (std::size_t i = 1; i < t.size(); ++i) ASSERT_LT(t[i - 1], t[i]);
    ASSERT_EQ(t.back() + sizes.back(), st.rows());
  }
}

TEST(ProbabilityMatrix, NormalizesAndRecordsOriginalSum) {
  Eigen::MatrixXd m(2, 1);
  m << 9.0, 1.0;
  ProbabilityMatrix pi(m);
  EXPECT_DOUBLE_EQ(pi(0, 0), 0.9);
  EXPECT_DOUBLE_EQ(pi(1, 0), 0.1);
  EXPECT_DOUBLE_EQ(pi.original_sum(), 10.0);
  EXPECT_NEAR(pi.matrix().sum(), 1.0, 1e-12);
}

TEST(ProbabilityMatrix, RejectsBadEntries) {
  EXPECT_THROW(ProbabilityMatrix(Eigen::MatrixXd::Zero(2, 2)), DomainError);
  Eigen::MatrixXd neg(1, 2);
  neg << 1.0, -0.1;
  EXPECT_THROW(ProbabilityMatrix{neg}, DomainError);
  Eigen::MatrixXd nan(1, 1);
  nan << std::nan("");
  EXPECT_THROW(ProbabilityMatrix{nan}, DomainError);
}

TEST(ProbabilityMatrix, UniformMinMarginalMatchesDirectFormula) {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::size_t> rs(1 + rng.below(3)), cs(1 + rng.below(3));
    for (auto& s : rs) s = 1 + rng.below(30);
    for (auto& s : cs) s = 1 + rng.below(30);
    BlockStructure st(rs, cs);
    const auto pi = ProbabilityMatrix::uniform(st);
    // Each row is hit with probability 1/n and each column with 1/m.
    const double expected = std::min(1.0 / static_cast<double>(st.rows()), 1.0 / static_cast<double>(st.cols()));
    EXPECT_NEAR(pi.min_marginal(st), expected, 1e-15);
  }
}

TEST(ProbabilityMatrix, MinMarginalTwoBlock) {
  BlockStructure st({150, 150}, {100});
  Eigen::MatrixXd m(2, 1);
  m << 0.9, 0.1;
  ProbabilityMatrix pi(m);
  EXPECT_NEAR(pi.min_marginal(st), 0.1 / 150.0, 1e-15);
  EXPECT_THROW(pi.check_shape(BlockStructure({1}, {1})), StructuralError);
}

TEST(ParamCount, UniformDimsNeedNoProjection) {
  EXPECT_EQ(param_count(layout_of({4, 4}, 4), std::vector<std::size_t>{10, 20}), 120);
}

TEST(ParamCount, MixedDimsPayForProjection) {
  EXPECT_EQ(param_count(layout_of({2, 4}, 4), std::vector<std::size_t>{10, 20}), 10 * 2 + 20 * 4 + 2 * 4);
}

TEST(ParamCount, MinimumDimension) {
  EXPECT_EQ(param_count(layout_of({1}, 1), std::vector<std::size_t>{7}), 7);
}

TEST(ParamCount, LengthMismatchAndFractionalDimsThrow) {
  EXPECT_THROW(param_count(layout_of({1, 2}, 2), std::vector<std::size_t>{3}), StructuralError);
  EXPECT_THROW(param_count(layout_of({1.5}, 2), std::vector<std::size_t>{3}), StructuralError);
}

TEST(ParamCount, MatchesCellCountOracle) {
  Rng rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t base = 1 + rng.below(12);
    std::vector<std::size_t> n(1 + rng.below(5)), d(n.size());
    std::vector<double> dims(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
      n[i] = 1 + rng.below(40);
      d[i] = 1 + rng.below(base);
      dims[i] = static_cast<double>(d[i]);
    }
    ASSERT_EQ(param_count(layout_of(dims, base), n), count_cells(d, base, n));
  }
}

// Raising one dim below the base never lowers the count. At d_i = base the
// projection disappears, which only saves parameters when n_i < base (base - 1).
TEST(ParamCount, MonotoneInEachDimBelowBase) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t base = 2 + rng.below(10);
    std::vector<std::size_t> n(1 + rng.below(4));
    std::vector<double> dims(n.size());
    for (std::size_t i = 0; i < n.size(); ++i) {
      n[i] = 1 + rng.below(200);
      dims[i] = static_cast<double>(1 + rng.below(base));
    }
    const std::size_t i = rng.below(n.size());
    if (dims[i] >= static_cast<double>(base)) continue;
    auto up = dims;
    up[i] += 1.0;
    const bool reaches_base = up[i] == static_cast<double>(base);
    if (reaches_base && n[i] < base * (base - 1)) continue;
    ASSERT_LE(param_count(layout_of(dims, base), n), param_count(layout_of(up, base), n));
  }
}

TEST(ParamCount, ProjectionDropCanLowerCountForSmallBlocks) {
  // 3 rows at dim 3 with a 3x4 projection cost 21; at dim 4 they cost 12.
  EXPECT_EQ(param_count(layout_of({3}, 4), std::vector<std::size_t>{3}), 21);
  EXPECT_EQ(param_count(layout_of({4}, 4), std::vector<std::size_t>{3}), 12);
}

TEST(MDLayout, IntegralDims) {
  EXPECT_TRUE(layout_of({1, 2}, 2).integral());
  EXPECT_FALSE(layout_of({0, 2}, 2).integral());
  EXPECT_FALSE(layout_of({1.25}, 2).integral());
  EXPECT_EQ(layout_of({3, 1}, 3).int_dims(), (std::vector<std::size_t>{3, 1}));
}

TEST(BlockGrid, IndexingIsRowMajor) {
  BlockGrid<int> g(2, 3, 0);
  g(1, 2) = 7;
  EXPECT_EQ(g.cells()[5], 7);
  RankGrid r(2, 2);
  r(0, 0) = 1;
  r(0, 1) = 2;
  r(1, 0) = 3;
  r(1, 1) = 4;
  EXPECT_EQ(grid_total(r), 10u);
  EXPECT_EQ(grid_row_sums(r), (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(grid_col_sums(r), (std::vector<std::size_t>{4, 6}));
}

TEST(MDEmbeddingLayer, ValidateCatchesInconsistentShapes) {
  MDEmbeddingLayer layer;
  layer.base_dim = 3;
  layer.blocks = {Matrix::Zero(2, 3), Matrix::Zero(4, 1)};
  layer.projections = {std::nullopt, Matrix::Zero(1, 3)};
  layer.offsets = {0, 2};
  EXPECT_NO_THROW(layer.validate());
  EXPECT_EQ(layer.rows(), 6u);
  layer.offsets = {0, 3};
  EXPECT_THROW(layer.validate(), StructuralError);
  layer.offsets = {0, 2};
  layer.projections[1] = Matrix::Zero(1, 2);
  EXPECT_THROW(layer.validate(), StructuralError);
  layer.projections[1] = std::nullopt;
  EXPECT_THROW(layer.validate(), StructuralError);
}

}  // namespace
