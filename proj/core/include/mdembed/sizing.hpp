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

// Descending singular values per (i, j) block.
using Spectra = BlockGrid<std::vector<double>>;

struct SizingResult {
  // dims = row embedding block dims d_w, base_dim = sum of block dims.
  MDLayout layout;
  BlockGrid<double> block_dims;       // d_ij after rounding
  BlockGrid<double> fractional_dims;  // continuous solution, when one exists
  std::vector<double> row_dims;       // d_w, i.e. sum_j d_ij
  std::vector<double> col_dims;       // d_v, i.e. sum_i d_ij
  double lambda = 0.0;
  std::int64_t achieved_budget = 0;
  // sum_ij pi_ij / (n_i m_j) * sum_{k > d_ij} sigma_k^2
  double objective_bound = 0.0;
};

// ---------------------------------------------------------------------------
// Popularity power-law rule.

// lambda = base_dim * max(p)^-alpha, d_i = lambda * p_i^alpha. The most
// popular block lands on base_dim exactly. Dims are left unrounded.
MDLayout power_law_sizing(const Vector& p, std::size_t base_dim, double alpha);

enum class RoundMode { kFloor, kNearest, kPow2 };

// Rounds every dim to a whole number clamped to [1, base_dim]. kPow2 picks
// the power of two nearest in log2 space.
MDLayout round_dims(const MDLayout& layout, RoundMode mode);

struct BudgetedLayouts {
  MDLayout rows;
  MDLayout cols;
  std::int64_t params = 0;
};

// Largest base dim whose rounded row and column layouts fit in `budget`
// parameters. Returns nullopt when even base_dim = 1 does not fit.
std::optional<BudgetedLayouts> fit_power_law_to_budget(const Vector& row_p, const Vector& col_p,
                                                       std::span<const std::size_t> row_sizes,
                                                       std::span<const std::size_t> col_sizes,
                                                       double alpha, std::int64_t budget,
                                                       RoundMode mode);

// ---------------------------------------------------------------------------
// Spectrum-driven allocation.

// sum_ij (n_i + m_j) d_ij.
double budget_cost(const BlockStructure& structure, const BlockGrid<double>& dims);

// Sum of sigma_k^2 for k beyond d, with the step-function interpolation for
// fractional d (the partial index contributes (ceil(d) - d) * sigma^2).
double spectral_tail(const std::vector<double>& sigma, double d);

// Popularity-weighted truncation loss sum_ij pi_ij / (n_i m_j) * tail_ij(d_ij).
double truncation_loss(const Spectra& spectra, const ProbabilityMatrix& pi,
                       const BlockStructure& structure, const BlockGrid<double>& dims);

// Water-filling: d_ij(lambda) counts sigma_ij(k)^2 >= lambda (n_i+m_j) n_i m_j / pi_ij,
// with lambda bisected on a log scale so the budget is met from below.
// Blocks may receive dimension 0.
SizingResult optimal_dims(const Spectra& spectra, const ProbabilityMatrix& pi,
                          const BlockStructure& structure, std::int64_t budget);

struct PowerLawBlock {
  double rho = 0.0;
  double beta = 0.0;
  std::size_t rank = 0;  // spectrum length; caps the block's dimension
};

// Closed form for sigma_ij(k) = rho_ij k^-beta with one shared beta:
// d_ij = s * zeta_ij * pi_ij^(1/2beta), zeta_ij = ((n_i+m_j) n_i m_j / rho_ij^2)^(-1/2beta),
// s fixed by the budget, blocks that exceed their rank clipped and the rest
// rescaled. block_dims are floored.
SizingResult optimal_dims_power_law(const BlockGrid<PowerLawBlock>& blocks, const ProbabilityMatrix& pi,
                                    const BlockStructure& structure, std::int64_t budget);

Spectra power_law_spectra(const BlockGrid<PowerLawBlock>& blocks);

// ---------------------------------------------------------------------------
// Gap and bound calculators.

// Spectral mass won (positive) or lost by md_dims against the uniform
// dimension budget / (n + m), weighted as in the popularity-weighted loss.
double ud_gap(const Spectra& spectra, const ProbabilityMatrix& pi, const BlockGrid<double>& md_dims,
              const BlockStructure& structure, std::int64_t budget);

// sum_ij pi_ij * g_ij(d_ij)^2 with g(x) = sigma_{floor(x)+1}.
double relaxation_gap_bound(const Spectra& spectra, const ProbabilityMatrix& pi,
                            const BlockGrid<double>& fractional_dims);

// Same sum with each term divided by n_i m_j, matching the units of truncation_loss.
double relaxation_gap_bound(const Spectra& spectra, const ProbabilityMatrix& pi,
                            const BlockGrid<double>& fractional_dims, const BlockStructure& structure);

struct AgnosticBound {
  double probability = 0.0;       // exp(-r n_eps delta^2 / (3 (1 - delta)))
  double sample_threshold = 0.0;  // (r / eps) (1 - delta)
};

AgnosticBound agnostic_recovery_bound(double rank, double eps, double n_tilde, double delta);

struct SampleRequirement {
  double required = 0.0;
  BlockGrid<double> per_block;
  std::size_t binding_row = 0;
  std::size_t binding_col = 0;
};

// max_ij C0 / pi_ij * n_ij r_ij kappa_ij^2 a_ij * max(mu_ij log n_ij, sqrt(a_ij) mu_ij^2 r_ij^6 kappa_ij^4)
// with n_ij = min(n_i, m_j) and a_ij the block aspect ratio.
SampleRequirement md_sample_requirement(const RankGrid& block_ranks, const BlockDiagnostics& diagnostics,
                                        const ProbabilityMatrix& pi, const BlockStructure& structure,
                                        double c0 = 1.0);

}  // namespace mdembed
