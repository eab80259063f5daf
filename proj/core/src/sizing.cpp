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

#include "mdembed/sizing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

namespace mdembed {

namespace {

double dsize(std::size_t v) { return static_cast<double>(v); }

void check_grid_shapes(const Spectra& spectra, const ProbabilityMatrix& pi, const BlockStructure& structure) {
  pi.check_shape(structure);
  if (spectra.rows() != structure.row_blocks() || spectra.cols() != structure.col_blocks())
    throw StructuralError("spectra grid does not match the block structure");
}

template <class T>
void check_grid(const BlockGrid<T>& grid, const BlockStructure& structure, const char* what) {
  if (grid.rows() != structure.row_blocks() || grid.cols() != structure.col_blocks())
    throw StructuralError(std::string(what) + " grid does not match the block structure");
}

void check_spectrum(const std::vector<double>& sigma) {
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!std::isfinite(sigma[k]) || sigma[k] < 0.0)
      throw StructuralError("singular values must be finite and nonnegative");
    if (k > 0 && sigma[k] > sigma[k - 1]) throw StructuralError("singular values must be nonincreasing");
  }
}

void fill_row_col_dims(SizingResult& result, std::size_t budget) {
  const auto& d = result.block_dims;
  result.row_dims.assign(d.rows(), 0.0);
  result.col_dims.assign(d.cols(), 0.0);
  for (std::size_t i = 0; i < d.rows(); ++i)
    for (std::size_t j = 0; j < d.cols(); ++j) {
      result.row_dims[i] += d(i, j);
      result.col_dims[j] += d(i, j);
    }
  result.layout.dims = result.row_dims;
  result.layout.base_dim =
      static_cast<std::size_t>(std::accumulate(result.row_dims.begin(), result.row_dims.end(), 0.0));
  result.layout.budget = static_cast<std::int64_t>(budget);
}

}  // namespace

MDLayout power_law_sizing(const Vector& p, std::size_t base_dim, double alpha) {
  if (p.size() == 0) throw StructuralError("probability vector is empty");
  if (base_dim < 1) throw DomainError("base dimension must be >= 1");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw DomainError("temperature alpha must be >= 0");
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (!(p(i) > 0.0) || !std::isfinite(p(i))) throw DomainError("block probabilities must be positive");

  const double p_max = p.maxCoeff();
  MDLayout layout;
  layout.base_dim = base_dim;
  layout.temperature = alpha;
  layout.scale = dsize(base_dim) * std::pow(p_max, -alpha);
  layout.dims.resize(static_cast<std::size_t>(p.size()));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    // Written relative to p_max so the top block maps to base_dim exactly.
    layout.dims[static_cast<std::size_t>(i)] =
        p(i) == p_max ? dsize(base_dim) : dsize(base_dim) * std::pow(p(i) / p_max, alpha);
  }
  return layout;
}

MDLayout round_dims(const MDLayout& layout, RoundMode mode) {
  MDLayout out = layout;
  const double cap = std::max(1.0, dsize(layout.base_dim));
  for (double& d : out.dims) {
    if (std::isnan(d)) throw DomainError("cannot round a NaN dimension");
    double r = d;
    switch (mode) {
      case RoundMode::kFloor:
        r = std::floor(d);
        break;
      case RoundMode::kNearest:
        r = std::round(d);
        break;
      case RoundMode::kPow2:
        r = d > 0.0 ? std::exp2(std::round(std::log2(d))) : 1.0;
        break;
    }
    d = std::clamp(r, 1.0, cap);
  }
  return out;
}

std::optional<BudgetedLayouts> fit_power_law_to_budget(const Vector& row_p, const Vector& col_p,
                                                       std::span<const std::size_t> row_sizes,
                                                       std::span<const std::size_t> col_sizes,
                                                       double alpha, std::int64_t budget,
                                                       RoundMode mode) {
  if (budget <= 0) throw StructuralError("parameter budget must be positive");
  if (row_p.size() != static_cast<Eigen::Index>(row_sizes.size()) ||
      col_p.size() != static_cast<Eigen::Index>(col_sizes.size()))
    throw StructuralError("probability vectors must match the block counts");
  // The most popular row block always sits at base_dim, so its rows alone
  // cost base_dim * n_top.
  Eigen::Index top = 0;
  row_p.maxCoeff(&top);
  const auto n_top = static_cast<std::int64_t>(row_sizes[static_cast<std::size_t>(top)]);
  const std::int64_t limit = budget / std::max<std::int64_t>(n_top, 1);
  std::optional<BudgetedLayouts> best;
  for (std::int64_t base = 1; base <= limit; ++base) {
    BudgetedLayouts cand;
    cand.rows = round_dims(power_law_sizing(row_p, static_cast<std::size_t>(base), alpha), mode);
    cand.cols = round_dims(power_law_sizing(col_p, static_cast<std::size_t>(base), alpha), mode);
    cand.params = param_count(cand.rows, row_sizes) + param_count(cand.cols, col_sizes);
    if (cand.params <= budget) {
      cand.rows.budget = budget;
      cand.cols.budget = budget;
      best = std::move(cand);
    }
  }
  return best;
}

double budget_cost(const BlockStructure& structure, const BlockGrid<double>& dims) {
  check_grid(dims, structure, "dimension");
  double cost = 0.0;
  for (std::size_t i = 0; i < dims.rows(); ++i)
    for (std::size_t j = 0; j < dims.cols(); ++j)
      cost += dsize(structure.row_sizes()[i] + structure.col_sizes()[j]) * dims(i, j);
  return cost;
}

double spectral_tail(const std::vector<double>& sigma, double d) {
  d = std::max(d, 0.0);
  const double r = dsize(sigma.size());
  if (d >= r) return 0.0;
  const auto k = static_cast<std::size_t>(std::floor(d));  // 0-based index of the partial value
  double tail = (dsize(k + 1) - d) * sigma[k] * sigma[k];
  for (std::size_t l = k + 1; l < sigma.size(); ++l) tail += sigma[l] * sigma[l];
  return tail;
}

double truncation_loss(const Spectra& spectra, const ProbabilityMatrix& pi, const BlockStructure& structure,
                       const BlockGrid<double>& dims) {
  check_grid_shapes(spectra, pi, structure);
  check_grid(dims, structure, "dimension");
  double loss = 0.0;
  for (std::size_t i = 0; i < dims.rows(); ++i)
    for (std::size_t j = 0; j < dims.cols(); ++j)
      loss += pi(i, j) / (dsize(structure.row_sizes()[i]) * dsize(structure.col_sizes()[j])) *
              spectral_tail(spectra(i, j), dims(i, j));
  return loss;
}

SizingResult optimal_dims(const Spectra& spectra, const ProbabilityMatrix& pi, const BlockStructure& structure,
                          std::int64_t budget) {
  if (budget <= 0) throw StructuralError("parameter budget must be positive");
  check_grid_shapes(spectra, pi, structure);
  bool any_signal = false;
  for (const auto& sigma : spectra.cells()) {
    check_spectrum(sigma);
    if (!sigma.empty() && sigma.front() > 0.0) any_signal = true;
  }
  if (!any_signal) throw DegenerateInputError("all spectra are zero");

  const std::size_t kw = structure.row_blocks();
  const std::size_t kv = structure.col_blocks();
  BlockGrid<double> cost(kw, kv), curvature(kw, kv);
  double lambda_lo = std::numeric_limits<double>::infinity();
  double lambda_hi = 0.0;
  for (std::size_t i = 0; i < kw; ++i)
    for (std::size_t j = 0; j < kv; ++j) {
      const double n = dsize(structure.row_sizes()[i]);
      const double m = dsize(structure.col_sizes()[j]);
      cost(i, j) = n + m;
      curvature(i, j) = (n + m) * n * m;
      if (pi(i, j) <= 0.0) continue;
      for (double s : spectra(i, j)) {
        if (s <= 0.0) continue;
        const double ratio = s * s * pi(i, j) / curvature(i, j);
        lambda_lo = std::min(lambda_lo, ratio);
        lambda_hi = std::max(lambda_hi, ratio);
      }
    }
  if (lambda_hi == 0.0) throw DegenerateInputError("no block has both positive probability and spectrum");

  // A unit of block (i, j) at index k is admitted when its marginal value
  // sigma_k^2 pi_ij / ((n_i+m_j) n_i m_j) reaches lambda.
  auto value = [&](std::size_t i, std::size_t j, std::size_t k) {
    const double s = spectra(i, j)[k];
    return s * s * pi(i, j) / curvature(i, j);
  };
  auto allocate = [&](double lambda) {
    BlockGrid<double> d(kw, kv, 0.0);
    for (std::size_t i = 0; i < kw; ++i)
      for (std::size_t j = 0; j < kv; ++j) {
        if (pi(i, j) <= 0.0) continue;
        const auto& sigma = spectra(i, j);
        std::size_t count = 0;
        while (count < sigma.size() && sigma[count] > 0.0 && value(i, j, count) >= lambda) ++count;
        d(i, j) = dsize(count);
      }
    return d;
  };
  const double b = static_cast<double>(budget);

  SizingResult result;
  BlockGrid<double> dims = allocate(lambda_lo);
  double lambda = lambda_lo;
  if (budget_cost(structure, dims) > b) {
    double lo = lambda_lo;          // infeasible
    double hi = lambda_hi * 2.0;    // feasible (allocates nothing)
    for (int iter = 0; iter < 200; ++iter) {
      const double mid = std::sqrt(lo * hi);
      if (!(mid > lo && mid < hi)) break;
      if (budget_cost(structure, allocate(mid)) <= b) hi = mid;
      else lo = mid;
    }
    lambda = hi;
    dims = allocate(hi);
    // Units whose value falls in [lo, hi) are exact ties at the threshold;
    // admit them in a fixed order while they fit.
    const BlockGrid<double> upper = allocate(lo);
    std::vector<std::tuple<double, std::size_t, std::size_t, std::size_t>> ties;
    for (std::size_t i = 0; i < kw; ++i)
      for (std::size_t j = 0; j < kv; ++j)
        for (auto k = static_cast<std::size_t>(dims(i, j)); k < static_cast<std::size_t>(upper(i, j)); ++k)
          ties.emplace_back(value(i, j, k), i, j, k);
    std::sort(ties.begin(), ties.end(), [](const auto& a, const auto& c) {
      if (std::get<0>(a) != std::get<0>(c)) return std::get<0>(a) > std::get<0>(c);
      return std::make_tuple(std::get<1>(a), std::get<2>(a), std::get<3>(a)) <
             std::make_tuple(std::get<1>(c), std::get<2>(c), std::get<3>(c));
    });
    double used = budget_cost(structure, dims);
    for (const auto& [v, i, j, k] : ties) {
      if (static_cast<std::size_t>(dims(i, j)) != k) break;
      if (used + cost(i, j) > b) break;
      dims(i, j) += 1.0;
      used += cost(i, j);
    }
  }

  // The convex relaxation spends the leftover budget on a fraction of the
  // best unit that did not fit.
  BlockGrid<double> frac = dims;
  {
    double best = -1.0;
    std::size_t bi = 0, bj = 0;
    for (std::size_t i = 0; i < kw; ++i)
      for (std::size_t j = 0; j < kv; ++j) {
        const auto k = static_cast<std::size_t>(dims(i, j));
        if (pi(i, j) <= 0.0 || k >= spectra(i, j).size() || spectra(i, j)[k] <= 0.0) continue;
        if (value(i, j, k) > best) {
          best = value(i, j, k);
          bi = i;
          bj = j;
        }
      }
    const double left = b - budget_cost(structure, dims);
    if (best > 0.0 && left > 0.0) frac(bi, bj) += std::min(1.0, left / cost(bi, bj));
  }

  result.block_dims = dims;
  result.fractional_dims = frac;
  result.lambda = lambda;
  result.achieved_budget = static_cast<std::int64_t>(std::llround(budget_cost(structure, dims)));
  result.objective_bound = truncation_loss(spectra, pi, structure, dims);
  fill_row_col_dims(result, static_cast<std::size_t>(budget));
  return result;
}

Spectra power_law_spectra(const BlockGrid<PowerLawBlock>& blocks) {
  Spectra spectra(blocks.rows(), blocks.cols());
  for (std::size_t i = 0; i < blocks.rows(); ++i)
    for (std::size_t j = 0; j < blocks.cols(); ++j) {
      const auto& b = blocks(i, j);
      auto& sigma = spectra(i, j);
      sigma.resize(b.rank);
      for (std::size_t k = 0; k < b.rank; ++k) sigma[k] = b.rho * std::pow(dsize(k + 1), -b.beta);
    }
  return spectra;
}

SizingResult optimal_dims_power_law(const BlockGrid<PowerLawBlock>& blocks, const ProbabilityMatrix& pi,
                                    const BlockStructure& structure, std::int64_t budget) {
  if (budget <= 0) throw StructuralError("parameter budget must be positive");
  pi.check_shape(structure);
  check_grid(blocks, structure, "power-law");
  if (blocks.size() == 0) throw StructuralError("no blocks");
  const double beta = blocks.cells().front().beta;
  for (const auto& b : blocks.cells()) {
    if (!(b.beta > 0.0)) throw StructuralError("power decay beta must be > 0");
    if (std::abs(b.beta - beta) > 1e-12) throw StructuralError("closed form requires one shared beta");
    if (!(b.rho >= 0.0)) throw StructuralError("spectral norm rho must be >= 0");
  }

  const std::size_t kw = structure.row_blocks();
  const std::size_t kv = structure.col_blocks();
  const double inv2b = 1.0 / (2.0 * beta);
  BlockGrid<double> weight(kw, kv, 0.0), cost(kw, kv, 0.0);
  for (std::size_t i = 0; i < kw; ++i)
    for (std::size_t j = 0; j < kv; ++j) {
      const double n = dsize(structure.row_sizes()[i]);
      const double m = dsize(structure.col_sizes()[j]);
      cost(i, j) = n + m;
      const auto& b = blocks(i, j);
      if (pi(i, j) <= 0.0 || b.rho <= 0.0 || b.rank == 0) continue;
      const double zeta = std::pow((n + m) * n * m / (b.rho * b.rho), -inv2b);
      weight(i, j) = zeta * std::pow(pi(i, j), inv2b);
    }

  // Water-fill: blocks whose share exceeds their rank are pinned there and
  // the remaining budget is spread over the others.
  BlockGrid<double> frac(kw, kv, 0.0);
  std::vector<bool> pinned(kw * kv, false);
  double scale = 0.0;
  for (;;) {
    double remaining = static_cast<double>(budget);
    double denom = 0.0;
    for (std::size_t c = 0; c < kw * kv; ++c) {
      if (pinned[c]) remaining -= cost.cells()[c] * dsize(blocks.cells()[c].rank);
      else denom += cost.cells()[c] * weight.cells()[c];
    }
    if (denom <= 0.0) {
      scale = std::numeric_limits<double>::infinity();
      break;
    }
    scale = std::max(remaining, 0.0) / denom;
    bool changed = false;
    for (std::size_t c = 0; c < kw * kv; ++c) {
      if (pinned[c]) continue;
      if (scale * weight.cells()[c] > dsize(blocks.cells()[c].rank)) {
        pinned[c] = true;
        changed = true;
      }
    }
    if (!changed) break;
  }
  for (std::size_t c = 0; c < kw * kv; ++c)
    frac.cells()[c] = pinned[c] ? dsize(blocks.cells()[c].rank) : scale * weight.cells()[c];

  SizingResult result;
  result.fractional_dims = frac;
  result.block_dims = frac;
  for (double& d : result.block_dims.cells()) d = std::floor(d + 1e-9);
  result.lambda = std::isfinite(scale) && scale > 0.0 ? std::pow(scale, -2.0 * beta) : 0.0;
  result.achieved_budget = static_cast<std::int64_t>(std::llround(budget_cost(structure, result.block_dims)));
  result.objective_bound = truncation_loss(power_law_spectra(blocks), pi, structure, result.block_dims);
  fill_row_col_dims(result, static_cast<std::size_t>(budget));
  return result;
}

double ud_gap(const Spectra& spectra, const ProbabilityMatrix& pi, const BlockGrid<double>& md_dims,
              const BlockStructure& structure, std::int64_t budget) {
  check_grid_shapes(spectra, pi, structure);
  check_grid(md_dims, structure, "dimension");
  const double uniform = static_cast<double>(budget) / dsize(structure.rows() + structure.cols());
  double gap = 0.0;
  for (std::size_t i = 0; i < md_dims.rows(); ++i)
    for (std::size_t j = 0; j < md_dims.cols(); ++j) {
      const double d = md_dims(i, j);
      const auto& sigma = spectra(i, j);
      // Indicator terms: mass gained above the uniform dim, or lost below it.
      double term = 0.0;
      if (d > uniform) term = spectral_tail(sigma, uniform) - spectral_tail(sigma, d);
      else if (d < uniform) term = -(spectral_tail(sigma, d) - spectral_tail(sigma, uniform));
      gap += pi(i, j) / (dsize(structure.row_sizes()[i]) * dsize(structure.col_sizes()[j])) * term;
    }
  return gap;
}

namespace {

double next_sigma_sq(const std::vector<double>& sigma, double d) {
  const auto k = static_cast<std::size_t>(std::floor(std::max(d, 0.0)));
  return k < sigma.size() ? sigma[k] * sigma[k] : 0.0;
}

}  // namespace

double relaxation_gap_bound(const Spectra& spectra, const ProbabilityMatrix& pi,
                            const BlockGrid<double>& fractional_dims) {
  if (spectra.rows() != pi.rows() || spectra.cols() != pi.cols() || fractional_dims.rows() != pi.rows() ||
      fractional_dims.cols() != pi.cols())
    throw StructuralError("spectra, probabilities and dims must share a block grid");
  double bound = 0.0;
  for (std::size_t i = 0; i < pi.rows(); ++i)
    for (std::size_t j = 0; j < pi.cols(); ++j)
      bound += pi(i, j) * next_sigma_sq(spectra(i, j), fractional_dims(i, j));
  return bound;
}

double relaxation_gap_bound(const Spectra& spectra, const ProbabilityMatrix& pi,
                            const BlockGrid<double>& fractional_dims, const BlockStructure& structure) {
  check_grid_shapes(spectra, pi, structure);
  check_grid(fractional_dims, structure, "dimension");
  double bound = 0.0;
  for (std::size_t i = 0; i < pi.rows(); ++i)
    for (std::size_t j = 0; j < pi.cols(); ++j)
      bound += pi(i, j) / (dsize(structure.row_sizes()[i]) * dsize(structure.col_sizes()[j])) *
               next_sigma_sq(spectra(i, j), fractional_dims(i, j));
  return bound;
}

AgnosticBound agnostic_recovery_bound(double rank, double eps, double n_tilde, double delta) {
  if (!(delta > 0.0 && delta < 0.5)) throw DomainError("delta must lie in (0, 1/2)");
  if (!(rank >= 1.0)) throw DomainError("rank must be >= 1");
  if (!(n_tilde >= 1.0)) throw DomainError("low-sample submatrix size must be >= 1");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
  AgnosticBound out;
  out.probability = std::exp(-rank * n_tilde * delta * delta / (3.0 * (1.0 - delta)));
  out.sample_threshold = rank / eps * (1.0 - delta);
  return out;
}

SampleRequirement md_sample_requirement(const RankGrid& block_ranks, const BlockDiagnostics& diagnostics,
                                        const ProbabilityMatrix& pi, const BlockStructure& structure,
                                        double c0) {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw DomainError("C0 must be positive");
  pi.check_shape(structure);
  check_grid(block_ranks, structure, "rank");
  check_grid(diagnostics.incoherence, structure, "incoherence");
  check_grid(diagnostics.condition, structure, "condition");
  check_grid(diagnostics.aspect, structure, "aspect");

  SampleRequirement out;
  out.per_block = BlockGrid<double>(structure.row_blocks(), structure.col_blocks(), 0.0);
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    for (std::size_t j = 0; j < structure.col_blocks(); ++j) {
      const double r = dsize(block_ranks(i, j));
      if (r == 0.0) continue;
      if (pi(i, j) <= 0.0)
        throw InfeasibleError("block (" + std::to_string(i) + "," + std::to_string(j) +
                              ") has rank > 0 but is never sampled");
      const double mu = diagnostics.incoherence(i, j);
      const double kappa = diagnostics.condition(i, j);
      const double a = diagnostics.aspect(i, j);
      if (!std::isfinite(mu) || !std::isfinite(kappa) || !std::isfinite(a))
        throw DomainError("block diagnostics must be finite");
      const double nhat = dsize(std::min(structure.row_sizes()[i], structure.col_sizes()[j]));
      const double k2 = kappa * kappa;
      const double inner = std::max(mu * std::log(nhat), std::sqrt(a) * mu * mu * std::pow(r, 6) * k2 * k2);
      const double req = c0 / pi(i, j) * nhat * r * k2 * a * inner;
      out.per_block(i, j) = req;
      if (req > out.required) {
        out.required = req;
        out.binding_row = i;
        out.binding_col = j;
      }
    }
  return out;
}

}  // namespace mdembed
