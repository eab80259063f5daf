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

#include "mdembed/core.hpp"

namespace mdembed {

struct LayerInit {
  enum class Kind { kXavierUniform, kConstant };
  Kind kind = Kind::kXavierUniform;
  double value = 0.0;

  static LayerInit xavier_uniform() { return {}; }
  static LayerInit constant(double c) { return {Kind::kConstant, c}; }
};

// Allocates E_i (n_i x d_i) and P_i (d_i x base_dim); blocks with
// d_i == base_dim get no projection. Deterministic given seed.
MDEmbeddingLayer build_layer(const MDLayout& layout, std::span<const std::size_t> block_sizes,
                             LayerInit init, std::uint64_t seed);

struct Location {
  std::size_t block = 0;
  std::size_t local = 0;

  bool operator==(const Location&) const = default;
};

// Block i and local row such that t_i <= x < t_i + n_i.
Location locate(std::size_t x, std::span<const std::size_t> offsets, std::span<const std::size_t> block_sizes);

// e_x = E_i[x - t_i] P_i, always of length base_dim.
RowVector forward(const MDEmbeddingLayer& layer, std::size_t x);

enum class Reduce { kSum, kMean };

RowVector forward_multi(const MDEmbeddingLayer& layer, std::span<const std::size_t> indices, Reduce reduce);

// Dense gradient buffers shaped like the layer.
struct LayerGradient {
  std::vector<Matrix> blocks;
  std::vector<std::optional<Matrix>> projections;
};

LayerGradient zero_gradient(const MDEmbeddingLayer& layer);

// Adds d(loss)/d(E, P) for one lookup given d(loss)/d(e_x) = grad_out.
void backward(const MDEmbeddingLayer& layer, std::size_t x, const RowVector& grad_out, LayerGradient& grad);

// In-place SGD update of the parameters touched by one lookup.
void sgd_step(MDEmbeddingLayer& layer, std::size_t x, const RowVector& grad_out, double learning_rate);

}  // namespace mdembed
