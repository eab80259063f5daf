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
#include <filesystem>
#include <string>
#include <vector>

#include "mdembed/blocking.hpp"
#include "mdembed/factorize.hpp"
#include "mdembed/io.hpp"
#include "mdembed/sizing.hpp"
#include "mdembed/synth.hpp"

namespace mdembed {

struct SweepScenario {
  enum class Kind { kTwoBlock, kSynth };
  Kind kind = Kind::kTwoBlock;
  TwoBlockParams two_block;
  // kSynth: the synth spec must carry pi. Its own seed is replaced per trial.
  SynthDocument synth;
};

struct SweepConfig {
  SweepScenario scenario;
  std::vector<double> alphas{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<std::int64_t> budgets;
  std::vector<double> sample_sizes;
  std::size_t trials = 5;
  std::uint64_t seed = 0;
  RoundMode round = RoundMode::kNearest;
  ProbabilityMode probability = ProbabilityMode::kRowAverage;
  PipelineConfig pipeline;
  unsigned threads = 1;

  // Throws DomainError for empty grids or zero trials.
  void validate() const;
};

SweepConfig sweep_config_from_json(const std::string& text);

enum class CellStatus { kOk, kInfeasible, kDiverged };

struct SweepRow {
  double alpha = 0.0;
  std::int64_t budget = 0;
  double samples = 0.0;
  std::size_t trial = 0;
  CellStatus status = CellStatus::kOk;
  std::size_t base_dim = 0;
  std::int64_t params = 0;
  std::vector<std::size_t> row_dims;
  TrainReport report;
};

struct SweepResults {
  // Rows ordered by (alpha, budget, samples, trial) in grid order.
  std::vector<SweepRow> rows;
  // Per matrix row: index of its cumulative-popularity-mass third (0 = most
  // popular) and its row block.
  std::vector<std::size_t> mass_third;
  std::vector<std::size_t> row_block;
  std::size_t row_blocks = 0;
};

// Sizes each cell with the popularity rule under its budget, trains the
// layer model and evaluates it. Data for trial t depends only on t, and the
// observations only on (samples, t), so every alpha and budget sees the same
// draw. Output is independent of thread count.
SweepResults run_sweep(const SweepConfig& cfg);

// Matrix rows sorted by per-row popularity (descending, ties by index) and
// cut where the cumulative mass crosses 1/3 and 2/3.
std::vector<std::size_t> mass_thirds(const BlockStructure& structure, const ProbabilityMatrix& pi);

enum class PartitionRule { kMassThirds, kBlocks };

struct PartitionCell {
  double alpha = 0.0;
  std::int64_t budget = 0;
  double samples = 0.0;
  std::size_t partition = 0;
  std::size_t trials = 0;
  double mean_mse = 0.0;
  double std_mse = 0.0;
  std::size_t entries = 0;  // test entries pooled over trials
};

// Per-partition test MSE averaged over the trials of each feasible cell.
std::vector<PartitionCell> popularity_partition_report(const SweepResults& results, PartitionRule rule);
std::string partition_report_csv(const std::vector<PartitionCell>& cells, PartitionRule rule);

// One row per (alpha, budget, samples, trial); deterministic.
std::string sweep_results_csv(const SweepResults& results);
// Per-cell means and sample standard deviations over feasible trials.
std::string sweep_summary_json(const SweepResults& results);
// Wall time per row; the only non-deterministic output.
std::string sweep_timing_csv(const SweepResults& results);

// Writes <out>, <out stem>.summary.json, <out stem>.partitions.csv and <out stem>.timing.csv.
void write_sweep(const SweepResults& results, const std::filesystem::path& out);

}  // namespace mdembed
