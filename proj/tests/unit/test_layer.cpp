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

#include <cmath>
#include <cstdint>
#include <vector>

#include <gtest/gtest.h>

#include "mdembed/layer.hpp"
#include "mdembed/rng.hpp"

namespace {

using namespace mdembed;

MDLayout layout_of(std::vector<double> dims, std::size_t base) {
  MDLayout l;
  l.dims = std::move(dims);
  l.base_dim = base;
  return l;
}

// Two blocks of sizes 2 and 3 with hand-set weights.
MDEmbeddingLayer small_layer() {
  MDEmbeddingLayer layer = build_layer(layout_of({2, 1}, 2), std::vector<std::size_t>{2, 3},
                                       LayerInit::constant(0.0), 0);
  layer.blocks[0] << 1, 2, 3, 4;
  layer.blocks[1] << 5, 6, 7;
  *layer.projections[1] << 10, -1;
  return layer;
}

TEST(Locate, Examples) {
  const std::vector<std::size_t> offsets{0, 2, 5}, sizes{2, 3, 4};
  EXPECT_EQ(locate(0, offsets, sizes), (Location{0, 0}));
  EXPECT_EQ(locate(1, offsets, sizes), (Location{0, 1}));
  EXPECT_EQ(locate(2, offsets, sizes), (Location{1, 0}));
  EXPECT_EQ(locate(8, offsets, sizes), (Location{2, 3}));
  EXPECT_THROW(locate(9, offsets, sizes), IndexError);
  EXPECT_THROW(locate(0, std::vector<std::size_t>{}, std::vector<std::size_t>{}), StructuralError);
}

TEST(Locate, InvertsOffsets) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes(1 + rng.below(6));
    for (auto& s : sizes) s = 1 + rng.below(10);
    const auto offsets = offsets_from_sizes(sizes);
    std::size_t x = 0;
    for (std::size_t b = 0; b < sizes.size(); ++b)
      for (std::size_t k = 0; k < sizes[b]; ++k, ++x) {
        const auto loc = locate(x, offsets, sizes);
        ASSERT_EQ(loc.block, b);
        ASSERT_EQ(loc.local, k);
        ASSERT_EQ(offsets[loc.block] + loc.local, x);
      }
  }
}

TEST(Forward, FullDimBlockReturnsRow) {
  const auto layer = small_layer();
  layer.validate();
  EXPECT_EQ(forward(layer, 1), (RowVector(2) << 3, 4).finished());
}

TEST(Forward, ProjectedBlock) {
  const auto layer = small_layer();
  EXPECT_EQ(forward(layer, 2), (RowVector(2) << 50, -5).finished());
  EXPECT_EQ(forward(layer, 4), (RowVector(2) << 70, -7).finished());
  EXPECT_THROW(forward(layer, 5), IndexError);
}

TEST(Forward, MultiHotSumAndMean) {
  const auto layer = small_layer();
  const std::vector<std::size_t> idx{0, 3};
  EXPECT_EQ(forward_multi(layer, idx, Reduce::kSum), (RowVector(2) << 61, -4).finished());
  EXPECT_EQ(forward_multi(layer, idx, Reduce::kMean), (RowVector(2) << 30.5, -2).finished());
  EXPECT_THROW(forward_multi(layer, std::vector<std::size_t>{}, Reduce::kSum), StructuralError);
}

TEST(BuildLayer, ShapesAndProjections) {
  const auto layer = build_layer(layout_of({8, 4, 2}, 8), std::vector<std::size_t>{10, 20, 30},
                                 LayerInit::xavier_uniform(), 11);
  layer.validate();
  EXPECT_EQ(layer.rows(), 60u);
  EXPECT_EQ(layer.dims(), (std::vector<std::size_t>{8, 4, 2}));
  EXPECT_FALSE(layer.projections[0]);
  ASSERT_TRUE(layer.projections[2]);
  EXPECT_EQ(layer.projections[2]->rows(), 2);
  EXPECT_EQ(layer.projections[2]->cols(), 8);
  EXPECT_EQ(layer.offsets, (std::vector<std::size_t>{0, 10, 30}));
}

TEST(BuildLayer, ConstantInitGivesConstantOutput) {
  const auto layer =
      build_layer(layout_of({4, 4}, 4), std::vector<std::size_t>{3, 3}, LayerInit::constant(0.0), 1);
  for (std::size_t x = 0; x < 6; ++x) EXPECT_TRUE(forward(layer, x).isZero());
}

TEST(BuildLayer, XavierBoundsAndDeterminism) {
  const MDLayout l = layout_of({6, 3}, 6);
  const std::vector<std::size_t> sizes{40, 50};
  const auto a = build_layer(l, sizes, LayerInit::xavier_uniform(), 5);
  const auto b = build_layer(l, sizes, LayerInit::xavier_uniform(), 5);
  const auto c = build_layer(l, sizes, LayerInit::xavier_uniform(), 6);
  EXPECT_EQ(a.blocks[1], b.blocks[1]);
  EXPECT_EQ(*a.projections[1], *b.projections[1]);
  EXPECT_NE(a.blocks[0], c.blocks[0]);
  EXPECT_LE(a.blocks[0].cwiseAbs().maxCoeff(), std::sqrt(6.0 / 46.0));
  EXPECT_LE(a.projections[1]->cwiseAbs().maxCoeff(), std::sqrt(6.0 / 9.0));
}

TEST(BuildLayer, RejectsBadLayouts) {
  const std::vector<std::size_t> sizes{3, 3};
  EXPECT_THROW(build_layer(layout_of({4}, 4), sizes, {}, 0), StructuralError);
  EXPECT_THROW(build_layer(layout_of({4, 5}, 4), sizes, {}, 0), StructuralError);
  EXPECT_THROW(build_layer(layout_of({4, 2.5}, 4), sizes, {}, 0), StructuralError);
  EXPECT_THROW(build_layer(layout_of({4, 2}, 4), std::vector<std::size_t>{3, 0}, {}, 0), StructuralError);
}

TEST(BuildLayer, ParameterCountMatchesStorage) {
  const MDLayout l = layout_of({8, 4, 1}, 8);
  const std::vector<std::size_t> sizes{5, 7, 9};
  const auto layer = build_layer(l, sizes, {}, 0);
  std::int64_t stored = 0;
  for (std::size_t i = 0; i < layer.block_count(); ++i) {
    stored += layer.blocks[i].size();
    if (layer.projections[i]) stored += layer.projections[i]->size();
  }
  EXPECT_EQ(stored, param_count(l, sizes));
}

// Loss L = g . forward(x); its gradient is what backward accumulates.
TEST(Backward, MatchesFiniteDifferences) {
  Rng rng(21);
  auto layer = build_layer(layout_of({5, 2}, 5), std::vector<std::size_t>{4, 6}, {}, 9);
  for (std::size_t x : {1u, 7u}) {
    RowVector g(5);
    for (Eigen::Index k = 0; k < 5; ++k) g(k) = rng.normal();
    auto grad = zero_gradient(layer);
    backward(layer, x, g, grad);
    auto loss = [&]() { return forward(layer, x).dot(g); };
    const double h = 1e-6;
    for (std::size_t i = 0; i < layer.block_count(); ++i) {
      for (Eigen::Index c = 0; c < layer.blocks[i].size(); ++c) {
        double& w = layer.blocks[i].data()[c];
        const double saved = w;
        w = saved + h;
        const double up = loss();
        w = saved - h;
        const double down = loss();
        w = saved;
        ASSERT_NEAR(grad.blocks[i].data()[c], (up - down) / (2 * h), 1e-7);
      }
      if (!layer.projections[i]) continue;
      for (Eigen::Index c = 0; c < layer.projections[i]->size(); ++c) {
        double& w = layer.projections[i]->data()[c];
        const double saved = w;
        w = saved + h;
        const double up = loss();
        w = saved - h;
        const double down = loss();
        w = saved;
        ASSERT_NEAR(grad.projections[i]->data()[c], (up - down) / (2 * h), 1e-7);
      }
    }
  }
}

TEST(SgdStep, MatchesBackwardUpdate) {
  auto layer = build_layer(layout_of({3, 2}, 3), std::vector<std::size_t>{2, 2}, {}, 4);
  auto expected = layer;
  const RowVector g = (RowVector(3) << 0.5, -1.0, 2.0).finished();
  auto grad = zero_gradient(layer);
  backward(layer, 3, g, grad);
  for (std::size_t i = 0; i < 2; ++i) {
    expected.blocks[i] -= 0.1 * grad.blocks[i];
    if (expected.projections[i]) *expected.projections[i] -= 0.1 * *grad.projections[i];
  }
  sgd_step(layer, 3, g, 0.1);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_TRUE(layer.blocks[i].isApprox(expected.blocks[i], 1e-15));
    if (layer.projections[i]) {
      EXPECT_TRUE(layer.projections[i]->isApprox(*expected.projections[i], 1e-15));
    }
  }
}

TEST(SgdStep, ReducesSquaredDistanceToTarget) {
  auto layer = build_layer(layout_of({4, 2}, 4), std::vector<std::size_t>{3, 3}, {}, 2);
  const RowVector target = RowVector::Ones(4);
  double before = (forward(layer, 4) - target).squaredNorm();
  for (int step = 0; step < 200; ++step) sgd_step(layer, 4, 2.0 * (forward(layer, 4) - target), 0.05);
  EXPECT_LT((forward(layer, 4) - target).squaredNorm(), 1e-6 * before);
}

}  // namespace
