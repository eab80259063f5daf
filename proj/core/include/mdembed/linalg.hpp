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
#include <vector>

#include "mdembed/core.hpp"

namespace mdembed {

class Rng;

// Thin SVD, singular values descending.
struct Svd {
  Matrix u;
  Vector s;
  Matrix v;
};

Svd thin_svd(const Eigen::Ref<const Matrix>& a);

std::vector<double> singular_values(const Eigen::Ref<const Matrix>& a);

// Count of singular values above kRankTolerance * sigma_max.
std::size_t numerical_rank(const std::vector<double>& sigma);
std::size_t numerical_rank(const Eigen::Ref<const Matrix>& a);

// n x r matrix with orthonormal columns: thin Q of a seeded standard-normal
// matrix, with column signs fixed so that diag(R) > 0.
Matrix random_orthonormal(std::size_t n, std::size_t r, Rng& rng);

double relative_frobenius_error(const Eigen::Ref<const Matrix>& reference,
                                const Eigen::Ref<const Matrix>& estimate);

}  // namespace mdembed
