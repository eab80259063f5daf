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

#include "mdembed/layer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mdembed/rng.hpp"

namespace mdembed {

namespace {

void fill(Matrix& m, LayerInit init, Rng& rng) {
  if (init.kind == LayerInit::Kind::kConstant) {
    m.setConstant(init.value);
    return;
  }
  const double bound = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
}

}  // namespace

MDEmbeddingLayer build_layer(const MDLayout& layout, std::span<const std::size_t> block_sizes, LayerInit init,
                             std::uint64_t seed) {
  if (layout.dims.size() != block_sizes.size())
    throw StructuralError("layout has " + std::to_string(layout.dims.size()) + " dims for " +
                          std::to_string(block_sizes.size()) + " blocks");
  const auto dims = layout.int_dims();
  if (layout.base_dim < 1) throw StructuralError("base dimension must be >= 1");

  MDEmbeddingLayer layer;
  layer.base_dim = layout.base_dim;
  layer.offsets = offsets_from_sizes(block_sizes);
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (block_sizes[i] == 0) throw StructuralError("block " + std::to_string(i) + " has no rows");
    if (dims[i] > layout.base_dim)
      throw StructuralError("block " + std::to_string(i) + " dim exceeds the base dimension");
    Rng rng(split_seed(seed, i));
    Matrix block(static_cast<Eigen::Index>(block_sizes[i]), static_cast<Eigen::Index>(dims[i]));
    fill(block, init, rng);
    layer.blocks.push_back(std::move(block));
    if (dims[i] == layout.base_dim) {
      layer.projections.emplace_back(std::nullopt);
    } else {
      Matrix proj(static_cast<Eigen::Index>(dims[i]), static_cast<Eigen::Index>(layout.base_dim));
      fill(proj, init, rng);
      layer.projections.emplace_back(std::move(proj));
    }
  }
  return layer;
}

Location locate(std::size_t x, std::span<const std::size_t> offsets, std::span<const std::size_t> block_sizes) {
  if (offsets.empty() || offsets.size() != block_sizes.size())
    throw StructuralError("offsets and block sizes must be nonempty and equal in length");
  const std::size_t n = offsets.back() + block_sizes.back();
  if (x >= n)
    throw IndexError("index " + std::to_string(x) + " out of range [0, " + std::to_string(n) + ")");
  const auto it = std::upper_bound(offsets.begin(), offsets.end(), x);
  const auto block = static_cast<std::size_t>(std::distance(offsets.begin(), it)) - 1;
  return {block, x - offsets[block]};
}

namespace {

Location locate_in(const MDEmbeddingLayer& layer, std::size_t x) {
  if (layer.blocks.empty()) throw StructuralError("layer has no blocks");
  const std::size_t last = layer.blocks.size() - 1;
  const std::size_t n = layer.offsets[last] + static_cast<std::size_t>(layer.blocks[last].rows());
  if (x >= n)
    throw IndexError("index " + std::to_string(x) + " out of range [0, " + std::to_string(n) + ")");
  const auto it = std::upper_bound(layer.offsets.begin(), layer.offsets.end(), x);
  const auto block = static_cast<std::size_t>(std::distance(layer.offsets.begin(), it)) - 1;
  return {block, x - layer.offsets[block]};
}

}  // namespace

RowVector forward(const MDEmbeddingLayer& layer, std::size_t x) {
  const auto [i, local] = locate_in(layer, x);
  const auto row = layer.blocks[i].row(static_cast<Eigen::Index>(local));
  if (!layer.projections[i]) return row;
  return row * *layer.projections[i];
}

RowVector forward_multi(const MDEmbeddingLayer& layer, std::span<const std::size_t> indices, Reduce reduce) {
  if (indices.empty()) throw StructuralError("multi-hot lookup needs at least one index");
  RowVector out = RowVector::Zero(static_cast<Eigen::Index>(layer.base_dim));
  for (std::size_t x : indices) out += forward(layer, x);
  if (reduce == Reduce::kMean) out /= static_cast<double>(indices.size());
  return out;
}

LayerGradient zero_gradient(const MDEmbeddingLayer& layer) {
  LayerGradient g;
  for (std::size_t i = 0; i < layer.blocks.size(); ++i) {
    g.blocks.push_back(Matrix::Zero(layer.blocks[i].rows(), layer.blocks[i].cols()));
    if (layer.projections[i])
      g.projections.emplace_back(Matrix::Zero(layer.projections[i]->rows(), layer.projections[i]->cols()));
    else
      g.projections.emplace_back(std::nullopt);
  }
  return g;
}

void backward(const MDEmbeddingLayer& layer, std::size_t x, const RowVector& grad_out, LayerGradient& grad) {
  const auto [i, local] = locate_in(layer, x);
  const auto r = static_cast<Eigen::Index>(local);
  if (!layer.projections[i]) {
    grad.blocks[i].row(r) += grad_out;
    return;
  }
  const Matrix& p = *layer.projections[i];
  grad.blocks[i].row(r) += grad_out * p.transpose();
  *grad.projections[i] += layer.blocks[i].row(r).transpose() * grad_out;
}

void sgd_step(MDEmbeddingLayer& layer, std::size_t x, const RowVector& grad_out, double learning_rate) {
  const auto [i, local] = locate_in(layer, x);
  const auto r = static_cast<Eigen::Index>(local);
  if (!layer.projections[i]) {
    layer.blocks[i].row(r) -= learning_rate * grad_out;
    return;
  }
  Matrix& p = *layer.projections[i];
  const RowVector row = layer.blocks[i].row(r);
  layer.blocks[i].row(r) -= learning_rate * (grad_out * p.transpose());
  p -= learning_rate * (row.transpose() * grad_out);
}

}  // namespace mdembed
