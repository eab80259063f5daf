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
#include <string>
#include <variant>
#include <vector>

#include "mdembed/core.hpp"

namespace mdembed {

struct SgdConfig {
  double learning_rate = 1e-2;
  std::size_t epochs = 500;
  std::size_t batch_size = 1;
  double init_scale = 0.5;  // factor entries ~ N(0, (init_scale / sqrt(rank))^2)
  std::uint64_t seed = 0;
  double convergence_tol = 1e-6;  // relative change of observed MSE per epoch
  std::size_t max_plateau_epochs = 5;
  // Stop once observed MSE falls below this fraction of the observed energy.
  double min_relative_mse = 1e-12;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Sampling.

// Each (k, l) is kept independently with probability
// N pi_{i(k) j(l)} / (n_{i(k)} m_{j(l)}), visiting entries row-major.
ObservationSet sample_observations(const TargetBlockMatrix& target, const ProbabilityMatrix& pi,
                                   double expected_count, std::uint64_t seed);

// Observations regrouped per block with block-local indices.
BlockGrid<std::vector<Observation>> split_by_block(std::span<const Observation> entries,
                                                   const BlockStructure& structure);

// ---------------------------------------------------------------------------
// Per-block SGD.

struct BlockFit {
  Matrix w;  // n x r
  Matrix v;  // m x r
  std::vector<double> trajectory;  // observed-entry MSE after each epoch
  double observed_mse = 0.0;
  std::size_t epochs_run = 0;
};

// Minibatch SGD on sum over observations of (M_kl - W_k V_l^T)^2.
BlockFit sgd_factor_block(std::span<const Observation> local_entries, std::size_t rows, std::size_t cols,
                          std::size_t rank, const SgdConfig& cfg);

struct LossGradient {
  double loss = 0.0;
  Matrix grad_w;
  Matrix grad_v;
};

// Sum of squared residuals over the observations and its exact gradient.
LossGradient observed_loss_gradient(std::span<const Observation> local_entries, const Matrix& w, const Matrix& v);

// ---------------------------------------------------------------------------
// Assembly.

// Column offset of block (i, j) inside the shared rank-r space: blocks are
// laid out row-block major, (0,0), (0,1), ..., (1,0), ...
std::size_t assembly_offset(const RankGrid& ranks, std::size_t i, std::size_t j);

// Concatenates W^(i1..) into row blocks and V^(1j..) into column blocks and
// builds the 0/1 projections that place each into the shared rank space.
FactorPair assemble_md(const BlockGrid<Matrix>& row_factors, const BlockGrid<Matrix>& col_factors,
                       const RankGrid& ranks);

// [W_1 P_W1; W_2 P_W2; ...] [V_1 P_V1; ...]^T.
Matrix reconstruct(const FactorPair& factors);

// ---------------------------------------------------------------------------
// Evaluation and diagnostics.

// sum_ij pi_ij / (n_i m_j) ||M^(ij) - Mhat^(ij)||_F^2.
double weighted_mse(const Matrix& target, const Matrix& estimate, const ProbabilityMatrix& pi,
                    const BlockStructure& structure);

// ||M - Mhat||_F / ||M||_F < tol.
bool recovered(const Matrix& target, const Matrix& estimate, double tol = 1e-3);

struct RankReport {
  std::size_t total_rank = 0;
  RankGrid block_ranks;
  std::size_t block_rank_sum = 0;
  bool additive = false;
};

RankReport rank_additive_check(const Matrix& data, const BlockStructure& structure);
RankReport rank_additive_check(const TargetBlockMatrix& target);

// max(max_i (n/r)||U_i||^2, max_j (m/r)||V_j||^2) over the rank-r SVD.
double incoherence(const Eigen::Ref<const Matrix>& block);

// sigma_1 / sigma_r at numerical rank r.
double condition_number(const Eigen::Ref<const Matrix>& block);

// Zero blocks report incoherence 1 and condition 1.
BlockDiagnostics block_diagnostics(const TargetBlockMatrix& target);

// Singular values up to numerical rank, descending.
std::vector<double> spectral_decay(const Eigen::Ref<const Matrix>& block);

// Least squares of log sigma_k on log k, k = 1..r. Needs >= 2 values.
std::optional<PowerFit> power_fit(const std::vector<double>& sigma);

SpectralProfile spectral_profile(const TargetBlockMatrix& target);

// ---------------------------------------------------------------------------
// End-to-end pipeline.

// Independent per-block factorization at fixed ranks over `factor_structure`
// (the target's own structure for MD, a single block for UD).
struct BlockwiseModel {
  BlockStructure factor_structure;
  RankGrid ranks;
};

// Jointly trained mixed-dimension layers: row embeddings over the target's
// row blocks and column embeddings over its column blocks, sharing base_dim.
struct LayerModel {
  MDLayout rows;
  MDLayout cols;
};

using TrainModel = std::variant<BlockwiseModel, LayerModel>;

BlockwiseModel ud_model(std::size_t rows, std::size_t cols, std::size_t rank);
BlockwiseModel md_model(const BlockStructure& structure, RankGrid ranks);

struct PipelineConfig {
  SgdConfig sgd;
  double recovery_tol = 1e-3;
  double test_fraction = 0.1;
  std::size_t max_test_entries = 100000;
  unsigned threads = 1;
  bool keep_reconstruction = false;
};

struct TestEntry {
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
  double prediction = 0.0;

  double squared_error() const { return (value - prediction) * (value - prediction); }
};

struct TrainReport {
  std::vector<std::string> trajectory_labels;
  std::vector<std::vector<double>> trajectories;
  std::vector<double> final_observed_mse;
  std::size_t observed = 0;
  double weighted_mse = 0.0;       // exact, against the full target
  double test_mse = 0.0;           // mean squared error on held-out entries
  double relative_error = 0.0;
  bool recovered = false;
  std::vector<TestEntry> test_entries;
  double wall_seconds = 0.0;
  std::optional<Matrix> reconstruction;
};

// Samples observations, fits the model, and evaluates against the target.
// All randomness derives from cfg.sgd.seed.
TrainReport train_pipeline(const TargetBlockMatrix& target, const ProbabilityMatrix& pi, double expected_count,
                           const TrainModel& model, const PipelineConfig& cfg);

// Held-out coordinates drawn pi-distributed from entries not in `observed`.
std::vector<TestEntry> draw_test_entries(const TargetBlockMatrix& target, const ProbabilityMatrix& pi,
                                         std::span<const Observation> observed, std::size_t count,
                                         std::uint64_t seed);

}  // namespace mdembed
