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
#include <optional>
#include <string>
#include <vector>

#include "mdembed/blocking.hpp"
#include "mdembed/core.hpp"
#include "mdembed/factorize.hpp"
#include "mdembed/sizing.hpp"
#include "mdembed/synth.hpp"

namespace mdembed {

// Plain-text file helpers. Writes are all-or-nothing per call.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

// Dense matrices, one row per line, comma separated. A first line that
// does not parse as numbers is treated as a header and skipped.
std::string matrix_to_csv(const Eigen::Ref<const Matrix>& m);
Matrix matrix_from_csv(const std::string& text);

// {"row_sizes": [...], "col_sizes": [...]}
std::string structure_to_json(const BlockStructure& structure);
BlockStructure structure_from_json(const std::string& text);

// Pi travels as a k_W x k_V matrix CSV.
ProbabilityMatrix pi_from_csv(const std::string& text);
std::string pi_to_csv(const ProbabilityMatrix& pi);

// {"ranks": [[...], ...]}
std::string ranks_to_json(const RankGrid& ranks);
RankGrid ranks_from_json(const std::string& text);

// {"dims", "base_dim", "budget", "temperature", "scale"}
std::string layout_to_json(const MDLayout& layout);
MDLayout layout_from_json(const std::string& text);

// block_i,block_j,k,sigma with 0-based indices. The grid shape is taken
// from the largest block indices present; missing blocks get empty spectra.
Spectra spectra_from_csv(const std::string& text);
std::string spectra_to_csv(const Spectra& spectra);

// id,count. Ids are kept as text.
struct FrequencyInput {
  std::vector<std::string> ids;
  FrequencyTable table;
};
FrequencyInput frequencies_from_csv(const std::string& text);

// {"permutation": [ids in block order], "offsets", "sizes", "masses"}
std::string partition_to_json(const FrequencyPartition& partition, const std::vector<std::string>& ids);

std::string sizing_to_json(const SizingResult& result);

// Report JSON. Wall time is included only when requested, so that the
// default output is a pure function of the inputs and the seed.
std::string report_to_json(const TrainReport& report, bool include_wall_time);

// {"row_sizes", "col_sizes", "ranks", "spectra": [[spec, ...], ...], "seed", "pi"?}
// where spec is {"kind": "power", "rho", "beta"}, {"kind": "flat", "level"}
// or {"kind": "explicit", "sigma": [...]}.
struct SynthDocument {
  SynthSpec spec;
  std::optional<ProbabilityMatrix> pi;
};
SynthDocument synth_from_json(const std::string& text);
std::string synth_to_json(const SynthDocument& doc);

// Ground truth written next to a generated matrix.
std::string sidecar_to_json(const TargetBlockMatrix& target, const Spectra& spectra, std::uint64_t seed);

// Writes <stem>.json plus <stem>.block<i>.csv and <stem>.proj<i>.csv.
void save_layer(const MDEmbeddingLayer& layer, const std::filesystem::path& stem);
MDEmbeddingLayer load_layer(const std::filesystem::path& stem);

}  // namespace mdembed
