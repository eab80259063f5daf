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

#include "mdembed/factorize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "mdembed/layer.hpp"
#include "mdembed/linalg.hpp"
#include "mdembed/rng.hpp"
#include "parallel.hpp"

namespace mdembed {

namespace {

double dsize(std::size_t v) { return static_cast<double>(v); }
Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

void shuffle(std::vector<std::size_t>& order, Rng& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
}

double observed_mse(std::span<const Observation> entries, const Matrix& w, const Matrix& v) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : entries) {
    const double e = o.value - w.row(idx(o.row)).dot(v.row(idx(o.col)));
    sum += e * e;
  }
  return sum / dsize(entries.size());
}

double mean_square(std::span<const Observation> entries) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : entries) sum += o.value * o.value;
  return sum / dsize(entries.size());
}

// Tracks the stopping rules shared by both trainers.
class StopRule {
 public:
  StopRule(const SgdConfig& cfg, double energy) : cfg_(cfg), floor_(cfg.min_relative_mse * energy) {}

  bool done(double mse) {
    if (!std::isfinite(mse))
      throw DomainError("SGD diverged (non-finite loss); lower the learning rate");
    if (mse <= floor_) return true;
    if (has_prev_) {
      const double change = std::abs(prev_ - mse) / std::max(prev_, std::numeric_limits<double>::min());
      plateau_ = change < cfg_.convergence_tol ? plateau_ + 1 : 0;
      if (cfg_.max_plateau_epochs > 0 && plateau_ >= cfg_.max_plateau_epochs) return true;
    }
    prev_ = mse;
    has_prev_ = true;
    return false;
  }

 private:
  const SgdConfig& cfg_;
  double floor_;
  double prev_ = 0.0;
  bool has_prev_ = false;
  std::size_t plateau_ = 0;
};

}  // namespace

void SgdConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw DomainError("learning rate must be > 0");
  if (epochs < 1) throw DomainError("epochs must be >= 1");
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  if (!(convergence_tol >= 0.0)) throw DomainError("convergence tolerance must be >= 0");
  if (!(init_scale >= 0.0)) throw DomainError("init scale must be >= 0");
  if (!(min_relative_mse >= 0.0)) throw DomainError("min relative MSE must be >= 0");
}

ObservationSet sample_observations(const TargetBlockMatrix& target, const ProbabilityMatrix& pi,
                                   double expected_count, std::uint64_t seed) {
  const auto& st = target.structure;
  pi.check_shape(st);
  if (!(expected_count >= 0.0) || !std::isfinite(expected_count))
    throw DomainError("expected sample count must be finite and >= 0");
  if (target.data.rows() != idx(st.rows()) || target.data.cols() != idx(st.cols()))
    throw StructuralError("target data does not match its block structure");

  BlockGrid<double> rate(st.row_blocks(), st.col_blocks());
  for (std::size_t i = 0; i < st.row_blocks(); ++i)
    for (std::size_t j = 0; j < st.col_blocks(); ++j) {
      const double p = expected_count * pi(i, j) / (dsize(st.row_sizes()[i]) * dsize(st.col_sizes()[j]));
      if (p > 1.0 + 1e-12)
        throw InfeasibleError("block (" + std::to_string(i) + "," + std::to_string(j) +
                              ") needs inclusion probability " + std::to_string(p) + " > 1");
      rate(i, j) = std::min(p, 1.0);
    }

  ObservationSet out;
  out.expected_count = expected_count;
  out.seed = seed;
  Rng rng(seed);
  for (std::size_t i = 0; i < st.row_blocks(); ++i) {
    for (std::size_t k = st.row_offsets()[i]; k < st.row_offsets()[i] + st.row_sizes()[i]; ++k) {
      for (std::size_t j = 0; j < st.col_blocks(); ++j) {
        const double p = rate(i, j);
        for (std::size_t l = st.col_offsets()[j]; l < st.col_offsets()[j] + st.col_sizes()[j]; ++l) {
          // One draw per entry keeps the stream position independent of the rate.
          const double u = rng.uniform();
          if (u < p) out.entries.push_back({k, l, target.data(idx(k), idx(l))});
        }
      }
    }
  }
  std::sort(out.entries.begin(), out.entries.end(),
            [](const Observation& a, const Observation& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  return out;
}

BlockGrid<std::vector<Observation>> split_by_block(std::span<const Observation> entries,
                                                   const BlockStructure& structure) {
  BlockGrid<std::vector<Observation>> out(structure.row_blocks(), structure.col_blocks());
  for (const auto& o : entries) {
    const std::size_t i = structure.row_block_of(o.row);
    const std::size_t j = structure.col_block_of(o.col);
    out(i, j).push_back({o.row - structure.row_offsets()[i], o.col - structure.col_offsets()[j], o.value});
  }
  return out;
}

LossGradient observed_loss_gradient(std::span<const Observation> local_entries, const Matrix& w, const Matrix& v) {
  if (w.cols() != v.cols()) throw StructuralError("factor ranks differ");
  LossGradient out;
  out.grad_w = Matrix::Zero(w.rows(), w.cols());
  out.grad_v = Matrix::Zero(v.rows(), v.cols());
  for (const auto& o : local_entries) {
    if (idx(o.row) >= w.rows() || idx(o.col) >= v.rows()) throw IndexError("observation outside the block");
    const auto wk = w.row(idx(o.row));
    const auto vl = v.row(idx(o.col));
    const double e = o.value - wk.dot(vl);
    out.loss += e * e;
    out.grad_w.row(idx(o.row)) += -2.0 * e * vl;
    out.grad_v.row(idx(o.col)) += -2.0 * e * wk;
  }
  return out;
}

BlockFit sgd_factor_block(std::span<const Observation> local_entries, std::size_t rows, std::size_t cols,
                          std::size_t rank, const SgdConfig& cfg) {
  cfg.validate();
  if (rank > std::min(rows, cols)) throw StructuralError("rank exceeds min(rows, cols) of the block");
  for (const auto& o : local_entries)
    if (o.row >= rows || o.col >= cols) throw IndexError("observation outside the block");

  BlockFit fit;
  Rng rng(cfg.seed);
  fit.w = Matrix(idx(rows), idx(rank));
  fit.v = Matrix(idx(cols), idx(rank));
  if (rank == 0) {
    fit.observed_mse = mean_square(local_entries);
    fit.trajectory = {fit.observed_mse};
    return fit;
  }
  const double scale = cfg.init_scale / std::sqrt(dsize(rank));
  for (Eigen::Index r = 0; r < fit.w.rows(); ++r)
    for (Eigen::Index c = 0; c < fit.w.cols(); ++c) fit.w(r, c) = scale * rng.normal();
  for (Eigen::Index r = 0; r < fit.v.rows(); ++r)
    for (Eigen::Index c = 0; c < fit.v.cols(); ++c) fit.v(r, c) = scale * rng.normal();
  if (local_entries.empty()) {
    fit.trajectory = {0.0};
    return fit;
  }

  std::vector<std::size_t> order(local_entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  StopRule stop(cfg, mean_square(local_entries));
  std::vector<double> errors;
  errors.reserve(cfg.batch_size);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double step = 2.0 * cfg.learning_rate / dsize(end - start);
      if (end - start == 1) {
        const auto& o = local_entries[order[start]];
        auto wk = fit.w.row(idx(o.row));
        auto vl = fit.v.row(idx(o.col));
        const double e = o.value - wk.dot(vl);
        const RowVector w_old = wk;
        wk += step * e * vl;
        vl += step * e * w_old;
        continue;
      }
      // Residuals at the pre-batch parameters, then a single summed update.
      errors.clear();
      for (std::size_t b = start; b < end; ++b) {
        const auto& o = local_entries[order[b]];
        errors.push_back(o.value - fit.w.row(idx(o.row)).dot(fit.v.row(idx(o.col))));
      }
      const Matrix w_old = fit.w;
      for (std::size_t b = start; b < end; ++b) {
        const auto& o = local_entries[order[b]];
        const double e = errors[b - start];
        fit.w.row(idx(o.row)) += step * e * fit.v.row(idx(o.col));
      }
      for (std::size_t b = start; b < end; ++b) {
        const auto& o = local_entries[order[b]];
        fit.v.row(idx(o.col)) += step * errors[b - start] * w_old.row(idx(o.row));
      }
    }
    const double mse = observed_mse(local_entries, fit.w, fit.v);
    fit.trajectory.push_back(mse);
    fit.epochs_run = epoch + 1;
    if (stop.done(mse)) break;
  }
  fit.observed_mse = fit.trajectory.back();
  return fit;
}

std::size_t assembly_offset(const RankGrid& ranks, std::size_t i, std::size_t j) {
  std::size_t offset = 0;
  for (std::size_t l = 0; l < i; ++l)
    for (std::size_t c = 0; c < ranks.cols(); ++c) offset += ranks(l, c);
  for (std::size_t c = 0; c < j; ++c) offset += ranks(i, c);
  return offset;
}

FactorPair assemble_md(const BlockGrid<Matrix>& row_factors, const BlockGrid<Matrix>& col_factors,
                       const RankGrid& ranks) {
  const std::size_t kw = ranks.rows();
  const std::size_t kv = ranks.cols();
  if (kw == 0 || kv == 0) throw StructuralError("rank grid is empty");
  if (row_factors.rows() != kw || row_factors.cols() != kv || col_factors.rows() != kw || col_factors.cols() != kv)
    throw StructuralError("factor grids must match the rank grid");

  std::vector<Eigen::Index> n(kw, -1), m(kv, -1);
  for (std::size_t i = 0; i < kw; ++i)
    for (std::size_t j = 0; j < kv; ++j) {
      const Matrix& w = row_factors(i, j);
      const Matrix& v = col_factors(i, j);
      if (w.cols() != idx(ranks(i, j)) || v.cols() != idx(ranks(i, j)))
        throw StructuralError("factor (" + std::to_string(i) + "," + std::to_string(j) +
                              ") does not have r_ij columns");
      if (n[i] < 0) n[i] = w.rows();
      if (m[j] < 0) m[j] = v.rows();
      if (w.rows() != n[i] || v.rows() != m[j])
        throw StructuralError("factors in one block row (column) must share a row count");
    }

  FactorPair fp;
  fp.row_factors = row_factors;
  fp.col_factors = col_factors;
  fp.ranks = ranks;
  fp.total_rank = grid_total(ranks);
  const auto r = idx(fp.total_rank);

  for (std::size_t i = 0; i < kw; ++i) {
    std::size_t width = 0;
    for (std::size_t j = 0; j < kv; ++j) width += ranks(i, j);
    Matrix wbar(n[i], idx(width));
    Eigen::Index c = 0;
    for (std::size_t j = 0; j < kv; ++j) {
      wbar.middleCols(c, idx(ranks(i, j))) = row_factors(i, j);
      c += idx(ranks(i, j));
    }
    // [0 | I | 0]: the row block's factors occupy a contiguous slice.
    Matrix pw = Matrix::Zero(idx(width), r);
    pw.middleCols(idx(assembly_offset(ranks, i, 0)), idx(width)).setIdentity();
    fp.row_blocks.push_back(std::move(wbar));
    fp.row_projections.push_back(std::move(pw));
  }

  for (std::size_t j = 0; j < kv; ++j) {
    std::size_t width = 0;
    for (std::size_t i = 0; i < kw; ++i) width += ranks(i, j);
    Matrix vbar(m[j], idx(width));
    // Interleaved: the (i, j) slice lands wherever block (i, j) sits in the row-major layout.
    Matrix pv = Matrix::Zero(idx(width), r);
    Eigen::Index c = 0;
    for (std::size_t i = 0; i < kw; ++i) {
      const auto rij = idx(ranks(i, j));
      vbar.middleCols(c, rij) = col_factors(i, j);
      pv.block(c, idx(assembly_offset(ranks, i, j)), rij, rij).setIdentity();
      c += rij;
    }
    fp.col_blocks.push_back(std::move(vbar));
    fp.col_projections.push_back(std::move(pv));
  }
  return fp;
}

Matrix reconstruct(const FactorPair& factors) {
  if (!factors.assembled()) throw StructuralError("factor pair has not been assembled");
  const auto r = idx(factors.total_rank);
  Eigen::Index n = 0, m = 0;
  for (const auto& b : factors.row_blocks) n += b.rows();
  for (const auto& b : factors.col_blocks) m += b.rows();
  Matrix left(n, r), right(m, r);
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < factors.row_blocks.size(); ++i) {
    left.middleRows(at, factors.row_blocks[i].rows()) = factors.row_blocks[i] * factors.row_projections[i];
    at += factors.row_blocks[i].rows();
  }
  at = 0;
  for (std::size_t j = 0; j < factors.col_blocks.size(); ++j) {
    right.middleRows(at, factors.col_blocks[j].rows()) = factors.col_blocks[j] * factors.col_projections[j];
    at += factors.col_blocks[j].rows();
  }
  if (r == 0) return Matrix::Zero(n, m);
  return left * right.transpose();
}

double weighted_mse(const Matrix& target, const Matrix& estimate, const ProbabilityMatrix& pi,
                    const BlockStructure& structure) {
  pi.check_shape(structure);
  if (target.rows() != estimate.rows() || target.cols() != estimate.cols() || target.rows() != idx(structure.rows()) ||
      target.cols() != idx(structure.cols()))
    throw StructuralError("matrix shapes do not match the block structure");
  double loss = 0.0;
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    for (std::size_t j = 0; j < structure.col_blocks(); ++j) {
      const auto r0 = idx(structure.row_offsets()[i]);
      const auto c0 = idx(structure.col_offsets()[j]);
      const auto nr = idx(structure.row_sizes()[i]);
      const auto nc = idx(structure.col_sizes()[j]);
      const double err = (target.block(r0, c0, nr, nc) - estimate.block(r0, c0, nr, nc)).squaredNorm();
      loss += pi(i, j) / (dsize(structure.row_sizes()[i]) * dsize(structure.col_sizes()[j])) * err;
    }
  return loss;
}

bool recovered(const Matrix& target, const Matrix& estimate, double tol) {
  return relative_frobenius_error(target, estimate) < tol;
}

RankReport rank_additive_check(const Matrix& data, const BlockStructure& structure) {
  if (data.rows() != idx(structure.rows()) || data.cols() != idx(structure.cols()))
    throw StructuralError("matrix shape does not match the block structure");
  RankReport report;
  report.total_rank = numerical_rank(data);
  report.block_ranks = RankGrid(structure.row_blocks(), structure.col_blocks());
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    for (std::size_t j = 0; j < structure.col_blocks(); ++j)
      report.block_ranks(i, j) = numerical_rank(data.block(idx(structure.row_offsets()[i]), idx(structure.col_offsets()[j]),
                                                           idx(structure.row_sizes()[i]), idx(structure.col_sizes()[j])));
  report.block_rank_sum = grid_total(report.block_ranks);
  report.additive = report.block_rank_sum == report.total_rank;
  return report;
}

RankReport rank_additive_check(const TargetBlockMatrix& target) {
  return rank_additive_check(target.data, target.structure);
}

double incoherence(const Eigen::Ref<const Matrix>& block) {
  const Svd svd = thin_svd(block);
  const std::vector<double> sigma(svd.s.data(), svd.s.data() + svd.s.size());
  const std::size_t r = numerical_rank(sigma);
  if (r == 0) throw DegenerateInputError("incoherence is undefined for a zero matrix");
  const double n = dsize(static_cast<std::size_t>(block.rows()));
  const double m = dsize(static_cast<std::size_t>(block.cols()));
  const double rr = dsize(r);
  const double left = svd.u.leftCols(idx(r)).rowwise().squaredNorm().maxCoeff() * n / rr;
  const double right = svd.v.leftCols(idx(r)).rowwise().squaredNorm().maxCoeff() * m / rr;
  return std::max(left, right);
}

double condition_number(const Eigen::Ref<const Matrix>& block) {
  const std::vector<double> sigma = singular_values(block);
  const std::size_t r = numerical_rank(sigma);
  if (r == 0) throw DegenerateInputError("condition number is undefined for a zero matrix");
  return sigma.front() / sigma[r - 1];
}

BlockDiagnostics block_diagnostics(const TargetBlockMatrix& target) {
  const auto& st = target.structure;
  BlockDiagnostics d{BlockGrid<double>(st.row_blocks(), st.col_blocks(), 1.0),
                     BlockGrid<double>(st.row_blocks(), st.col_blocks(), 1.0),
                     BlockGrid<double>(st.row_blocks(), st.col_blocks(), 1.0)};
  for (std::size_t i = 0; i < st.row_blocks(); ++i)
    for (std::size_t j = 0; j < st.col_blocks(); ++j) {
      const double n = dsize(st.row_sizes()[i]);
      const double m = dsize(st.col_sizes()[j]);
      d.aspect(i, j) = std::max(n, m) / std::min(n, m);
      const auto blk = target.block(i, j);
      if (numerical_rank(blk) == 0) continue;
      d.incoherence(i, j) = incoherence(blk);
      d.condition(i, j) = condition_number(blk);
    }
  return d;
}

std::vector<double> spectral_decay(const Eigen::Ref<const Matrix>& block) {
  std::vector<double> sigma = singular_values(block);
  const std::size_t r = numerical_rank(sigma);
  if (r == 0) throw DegenerateInputError("spectral decay is undefined for a zero matrix");
  sigma.resize(r);
  return sigma;
}

std::optional<PowerFit> power_fit(const std::vector<double>& sigma) {
  if (sigma.size() < 2) return std::nullopt;
  const double count = dsize(sigma.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    if (!(sigma[k] > 0.0)) return std::nullopt;
    const double x = std::log(dsize(k + 1));
    const double y = std::log(sigma[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (count * sxy - sx * sy) / (count * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / count;
  double ss = 0.0;
  for (std::size_t k = 0; k < sigma.size(); ++k) {
    const double resid = std::log(sigma[k]) - (intercept + slope * std::log(dsize(k + 1)));
    ss += resid * resid;
  }
  return PowerFit{std::exp(intercept), -slope, std::sqrt(ss / count)};
}

SpectralProfile spectral_profile(const TargetBlockMatrix& target) {
  const auto& st = target.structure;
  SpectralProfile profile{BlockGrid<std::vector<double>>(st.row_blocks(), st.col_blocks()),
                          BlockGrid<std::optional<PowerFit>>(st.row_blocks(), st.col_blocks())};
  for (std::size_t i = 0; i < st.row_blocks(); ++i)
    for (std::size_t j = 0; j < st.col_blocks(); ++j) {
      std::vector<double> sigma = singular_values(target.block(i, j));
      sigma.resize(numerical_rank(sigma));
      profile.fits(i, j) = power_fit(sigma);
      profile.sigma(i, j) = std::move(sigma);
    }
  return profile;
}

BlockwiseModel ud_model(std::size_t rows, std::size_t cols, std::size_t rank) {
  RankGrid ranks(1, 1, rank);
  return {BlockStructure({rows}, {cols}), ranks};
}

BlockwiseModel md_model(const BlockStructure& structure, RankGrid ranks) {
  if (ranks.rows() != structure.row_blocks() || ranks.cols() != structure.col_blocks())
    throw StructuralError("rank grid does not match the block structure");
  return {structure, std::move(ranks)};
}

std::vector<TestEntry> draw_test_entries(const TargetBlockMatrix& target, const ProbabilityMatrix& pi,
                                         std::span<const Observation> observed, std::size_t count,
                                         std::uint64_t seed) {
  const auto& st = target.structure;
  pi.check_shape(st);
  std::vector<char> taken(st.rows() * st.cols(), 0);
  for (const auto& o : observed) taken[o.row * st.cols() + o.col] = 1;

  BlockGrid<std::vector<std::size_t>> free(st.row_blocks(), st.col_blocks());
  for (std::size_t i = 0; i < st.row_blocks(); ++i)
    for (std::size_t j = 0; j < st.col_blocks(); ++j) {
      if (pi(i, j) <= 0.0) continue;
      auto& list = free(i, j);
      for (std::size_t k = st.row_offsets()[i]; k < st.row_offsets()[i] + st.row_sizes()[i]; ++k)
        for (std::size_t l = st.col_offsets()[j]; l < st.col_offsets()[j] + st.col_sizes()[j]; ++l)
          if (!taken[k * st.cols() + l]) list.push_back(k * st.cols() + l);
    }

  std::vector<TestEntry> out;
  Rng rng(seed);
  while (out.size() < count) {
    double mass = 0.0;
    for (std::size_t c = 0; c < free.size(); ++c)
      if (!free.cells()[c].empty()) mass += pi.matrix()(idx(c / st.col_blocks()), idx(c % st.col_blocks()));
    if (mass <= 0.0) break;
    double u = rng.uniform() * mass;
    std::size_t pick = free.size();
    for (std::size_t c = 0; c < free.size(); ++c) {
      if (free.cells()[c].empty()) continue;
      pick = c;
      u -= pi.matrix()(idx(c / st.col_blocks()), idx(c % st.col_blocks()));
      if (u < 0.0) break;
    }
    auto& list = free.cells()[pick];
    const auto at = static_cast<std::size_t>(rng.below(list.size()));
    const std::size_t flat = list[at];
    list[at] = list.back();
    list.pop_back();
    const std::size_t k = flat / st.cols();
    const std::size_t l = flat % st.cols();
    out.push_back({k, l, target.data(idx(k), idx(l)), 0.0});
  }
  return out;
}

namespace {

struct LayerFit {
  MDEmbeddingLayer rows;
  MDEmbeddingLayer cols;
  std::vector<double> trajectory;
};

double layer_mse(std::span<const Observation> entries, const MDEmbeddingLayer& rows, const MDEmbeddingLayer& cols) {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& o : entries) {
    const double e = o.value - forward(rows, o.row).dot(forward(cols, o.col));
    sum += e * e;
  }
  return sum / dsize(entries.size());
}

LayerFit fit_layer_model(std::span<const Observation> entries, const BlockStructure& structure,
                         const LayerModel& model, const SgdConfig& cfg) {
  cfg.validate();
  if (model.rows.base_dim != model.cols.base_dim)
    throw StructuralError("row and column layouts must share a base dimension");
  LayerFit fit{build_layer(model.rows, structure.row_sizes(), LayerInit::xavier_uniform(), split_seed(cfg.seed, 10)),
               build_layer(model.cols, structure.col_sizes(), LayerInit::xavier_uniform(), split_seed(cfg.seed, 11)),
               {}};
  if (entries.empty()) {
    fit.trajectory = {0.0};
    return fit;
  }
  Rng rng(split_seed(cfg.seed, 12));
  std::vector<std::size_t> order(entries.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  StopRule stop(cfg, mean_square(entries));
  struct Pending {
    std::size_t row, col;
    RowVector grad_u, grad_v;
  };
  std::vector<Pending> pending;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / dsize(end - start);
      pending.clear();
      for (std::size_t b = start; b < end; ++b) {
        const auto& o = entries[order[b]];
        const RowVector u = forward(fit.rows, o.row);
        const RowVector v = forward(fit.cols, o.col);
        const double e = o.value - u.dot(v);
        pending.push_back({o.row, o.col, (-2.0 * e * scale) * v, (-2.0 * e * scale) * u});
      }
      for (const auto& p : pending) {
        sgd_step(fit.rows, p.row, p.grad_u, cfg.learning_rate);
        sgd_step(fit.cols, p.col, p.grad_v, cfg.learning_rate);
      }
    }
    const double mse = layer_mse(entries, fit.rows, fit.cols);
    fit.trajectory.push_back(mse);
    if (stop.done(mse)) break;
  }
  return fit;
}

Matrix layer_reconstruction(const MDEmbeddingLayer& rows, const MDEmbeddingLayer& cols) {
  Matrix u(idx(rows.rows()), idx(rows.base_dim));
  Matrix v(idx(cols.rows()), idx(cols.base_dim));
  for (std::size_t k = 0; k < rows.rows(); ++k) u.row(idx(k)) = forward(rows, k);
  for (std::size_t l = 0; l < cols.rows(); ++l) v.row(idx(l)) = forward(cols, l);
  return u * v.transpose();
}

}  // namespace

TrainReport train_pipeline(const TargetBlockMatrix& target, const ProbabilityMatrix& pi, double expected_count,
                           const TrainModel& model, const PipelineConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.sgd.validate();
  const auto& st = target.structure;
  const std::uint64_t seed = cfg.sgd.seed;
  const ObservationSet obs = sample_observations(target, pi, expected_count, split_seed(seed, 1));

  TrainReport report;
  report.observed = obs.entries.size();
  Matrix estimate;

  if (const auto* bw = std::get_if<BlockwiseModel>(&model)) {
    const auto& fs = bw->factor_structure;
    if (fs.rows() != st.rows() || fs.cols() != st.cols())
      throw StructuralError("factor structure must cover the target matrix");
    if (bw->ranks.rows() != fs.row_blocks() || bw->ranks.cols() != fs.col_blocks())
      throw StructuralError("rank grid does not match the factor structure");
    const auto local = split_by_block(obs.entries, fs);
    const std::size_t kw = fs.row_blocks();
    const std::size_t kv = fs.col_blocks();
    std::vector<BlockFit> fits(kw * kv);
    detail::parallel_for(kw * kv, cfg.threads, [&](std::size_t c) {
      const std::size_t i = c / kv;
      const std::size_t j = c % kv;
      SgdConfig block_cfg = cfg.sgd;
      block_cfg.seed = split_seed(seed, 2, c);
      fits[c] = sgd_factor_block(local(i, j), fs.row_sizes()[i], fs.col_sizes()[j], bw->ranks(i, j), block_cfg);
      // Unobserved blocks carry no information; predict zero rather than the random init.
      if (local(i, j).empty()) {
        fits[c].w.setZero();
        fits[c].v.setZero();
      }
    });
    BlockGrid<Matrix> w(kw, kv), v(kw, kv);
    for (std::size_t c = 0; c < kw * kv; ++c) {
      w.cells()[c] = std::move(fits[c].w);
      v.cells()[c] = std::move(fits[c].v);
      report.trajectory_labels.push_back("block " + std::to_string(c / kv) + "," + std::to_string(c % kv));
      report.final_observed_mse.push_back(fits[c].observed_mse);
      report.trajectories.push_back(std::move(fits[c].trajectory));
    }
    estimate = reconstruct(assemble_md(w, v, bw->ranks));
  } else {
    const auto& lm = std::get<LayerModel>(model);
    LayerFit fit = fit_layer_model(obs.entries, st, lm, cfg.sgd);
    report.trajectory_labels.push_back("layer");
    report.final_observed_mse.push_back(fit.trajectory.back());
    report.trajectories.push_back(std::move(fit.trajectory));
    estimate = obs.entries.empty() ? Matrix::Zero(target.data.rows(), target.data.cols())
                                   : layer_reconstruction(fit.rows, fit.cols);
  }

  report.weighted_mse = weighted_mse(target.data, estimate, pi, st);
  report.relative_error = relative_frobenius_error(target.data, estimate);
  report.recovered = report.relative_error < cfg.recovery_tol;

  const auto cells = st.rows() * st.cols();
  const auto test_count = std::min(cfg.max_test_entries,
                                   static_cast<std::size_t>(std::floor(cfg.test_fraction * dsize(cells))));
  report.test_entries = draw_test_entries(target, pi, obs.entries, test_count, split_seed(seed, 3));
  double sum = 0.0;
  for (auto& t : report.test_entries) {
    t.prediction = estimate(idx(t.row), idx(t.col));
    sum += t.squared_error();
  }
  report.test_mse = report.test_entries.empty() ? 0.0 : sum / dsize(report.test_entries.size());
  if (cfg.keep_reconstruction) report.reconstruction = std::move(estimate);
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace mdembed
