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

#include "mdembed/synth.hpp"

#include <cmath>
#include <string>

#include "mdembed/linalg.hpp"
#include "mdembed/rng.hpp"

namespace mdembed {

std::vector<double> SpectrumSpec::values(std::size_t r) const {
  std::vector<double> out(r);
  switch (kind) {
    case Kind::kPower:
      if (!(rho > 0.0) || !(beta >= 0.0)) throw DomainError("power spectrum needs rho > 0 and beta >= 0");
      for (std::size_t k = 0; k < r; ++k) out[k] = rho * std::pow(static_cast<double>(k + 1), -beta);
      break;
    case Kind::kFlat:
      if (!(level > 0.0)) throw DomainError("flat spectrum level must be positive");
      out.assign(r, level);
      break;
    case Kind::kExplicit:
      if (sigma.size() != r)
        throw StructuralError("explicit spectrum has " + std::to_string(sigma.size()) + " values for rank " +
                              std::to_string(r));
      for (std::size_t k = 0; k < r; ++k) {
        if (!(sigma[k] > 0.0)) throw DomainError("explicit singular values must be positive");
        if (k > 0 && sigma[k] > sigma[k - 1]) throw DomainError("explicit singular values must be nonincreasing");
      }
      out = sigma;
      break;
  }
  return out;
}

Matrix gen_low_rank_block(std::size_t n, std::size_t m, std::size_t r, const SpectrumSpec& spectrum,
                          std::uint64_t seed) {
  if (r > std::min(n, m)) throw StructuralError("rank exceeds min(n, m)");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m));
  if (r == 0) return out;
  const std::vector<double> sigma = spectrum.values(r);
  Rng rng(seed);
  const Matrix u = random_orthonormal(n, r, rng);
  const Matrix v = random_orthonormal(m, r, rng);
  const Vector s = Eigen::Map<const Vector>(sigma.data(), static_cast<Eigen::Index>(r));
  out = u * s.asDiagonal() * v.transpose();
  return out;
}

TargetBlockMatrix gen_rank_additive(const SynthSpec& spec) {
  const auto& st = spec.structure;
  const std::size_t kw = st.row_blocks();
  const std::size_t kv = st.col_blocks();
  if (kw == 0 || kv == 0) throw StructuralError("synth spec has no blocks");
  if (spec.block_ranks.rows() != kw || spec.block_ranks.cols() != kv || spec.spectra.rows() != kw ||
      spec.spectra.cols() != kv)
    throw StructuralError("block ranks and spectra must match the block structure");

  const auto row_sums = grid_row_sums(spec.block_ranks);
  const auto col_sums = grid_col_sums(spec.block_ranks);
  for (std::size_t i = 0; i < kw; ++i)
    if (row_sums[i] > st.row_sizes()[i])
      throw StructuralError("block row " + std::to_string(i) + " asks for rank " + std::to_string(row_sums[i]) +
                            " with only " + std::to_string(st.row_sizes()[i]) + " rows");
  for (std::size_t j = 0; j < kv; ++j)
    if (col_sums[j] > st.col_sizes()[j])
      throw StructuralError("block column " + std::to_string(j) + " asks for rank " +
                            std::to_string(col_sums[j]) + " with only " + std::to_string(st.col_sizes()[j]) +
                            " columns");

  std::vector<Matrix> left(kw), right(kv);
  for (std::size_t i = 0; i < kw; ++i) {
    Rng rng(split_seed(spec.seed, 0, i));
    left[i] = random_orthonormal(st.row_sizes()[i], row_sums[i], rng);
  }
  for (std::size_t j = 0; j < kv; ++j) {
    Rng rng(split_seed(spec.seed, 1, j));
    right[j] = random_orthonormal(st.col_sizes()[j], col_sums[j], rng);
  }

  TargetBlockMatrix out;
  out.structure = st;
  out.block_ranks = spec.block_ranks;
  out.rank = grid_total(spec.block_ranks);
  out.rank_additive = true;
  out.data = Matrix::Zero(static_cast<Eigen::Index>(st.rows()), static_cast<Eigen::Index>(st.cols()));

  std::vector<std::size_t> col_cursor(kv, 0);
  for (std::size_t i = 0; i < kw; ++i) {
    std::size_t row_cursor = 0;
    for (std::size_t j = 0; j < kv; ++j) {
      const std::size_t r = spec.block_ranks(i, j);
      if (r > 0) {
        const std::vector<double> sigma = spec.spectra(i, j).values(r);
        const Vector s = Eigen::Map<const Vector>(sigma.data(), static_cast<Eigen::Index>(r));
        const auto u = left[i].middleCols(static_cast<Eigen::Index>(row_cursor), static_cast<Eigen::Index>(r));
        const auto v = right[j].middleCols(static_cast<Eigen::Index>(col_cursor[j]), static_cast<Eigen::Index>(r));
        out.block(i, j) = u * s.asDiagonal() * v.transpose();
      }
      row_cursor += r;
      col_cursor[j] += r;
    }
  }
  return out;
}

TwoBlockScenario gen_two_block_scenario(const TwoBlockParams& params) {
  if (!(params.eps > 0.0 && params.eps < 0.5)) throw DomainError("two-block scenario needs 0 < eps < 1/2");
  const std::size_t n = params.rows_per_block;
  const std::size_t m = params.cols;
  auto unit_rms = [&](std::size_t r) {
    return SpectrumSpec::flat(std::sqrt(static_cast<double>(n) * static_cast<double>(m) / static_cast<double>(r)));
  };
  SynthSpec spec;
  spec.structure = BlockStructure({n, n}, {m});
  spec.block_ranks = RankGrid(2, 1);
  spec.block_ranks(0, 0) = params.popular_rank;
  spec.block_ranks(1, 0) = params.rare_rank;
  spec.spectra = BlockGrid<SpectrumSpec>(2, 1);
  spec.spectra(0, 0) = params.popular_spectrum.value_or(unit_rms(std::max<std::size_t>(params.popular_rank, 1)));
  spec.spectra(1, 0) = params.rare_spectrum.value_or(unit_rms(std::max<std::size_t>(params.rare_rank, 1)));
  spec.seed = params.seed;

  Eigen::MatrixXd pi(2, 1);
  pi << 1.0 - params.eps, params.eps;
  return {gen_rank_additive(spec), ProbabilityMatrix(pi)};
}

std::size_t popular_rank_for(double eps) {
  if (!(eps > 0.0 && eps < 0.5)) throw DomainError("eps must lie in (0, 1/2)");
  return static_cast<std::size_t>(std::llround(1.0 / eps));
}

}  // namespace mdembed
