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


#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "mdembed/factorize.hpp"
#include "mdembed/layer.hpp"
#include "mdembed/rng.hpp"
#include "mdembed/sizing.hpp"
#include "mdembed/synth.hpp"

namespace {

using namespace mdembed;

MDEmbeddingLayer make_layer(std::size_t blocks, std::size_t rows, std::size_t base) {
  MDLayout layout;
  layout.base_dim = base;
  std::vector<std::size_t> sizes(blocks, rows);
  for (std::size_t i = 0; i < blocks; ++i) layout.dims.push_back(static_cast<double>(std::max<std::size_t>(1, base >> i)));
  return build_layer(layout, sizes, LayerInit::xavier_uniform(), 7);
}

void BM_Forward(benchmark::State& state) {
  const auto base = static_cast<std::size_t>(state.range(0));
  const auto layer = make_layer(4, 10000, base);
  Rng rng(3);
  std::vector<std::size_t> ids(4096);
  for (auto& x : ids) x = static_cast<std::size_t>(rng.uniform() * 40000.0);
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward(layer, ids[k++ & 4095]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(64)->Arg(256);

void BM_OptimalDims(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  BlockStructure structure(std::vector<std::size_t>(k, 200), std::vector<std::size_t>(k, 200));
  Spectra spectra(k, k);
  Eigen::MatrixXd raw(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      auto& s = spectra(i, j);
      for (std::size_t r = 1; r <= 100; ++r) s.push_back(static_cast<double>(i + j + 1) / static_cast<double>(r));
      raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0 / static_cast<double>((i + 1) * (j + 1));
    }
  const ProbabilityMatrix pi(raw);
  const auto budget = static_cast<std::int64_t>(k * k * 400 * 20);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_dims(spectra, pi, structure, budget));
}
BENCHMARK(BM_OptimalDims)->Arg(2)->Arg(4)->Arg(8);

void BM_SgdEpoch(benchmark::State& state) {
  const auto rank = static_cast<std::size_t>(state.range(0));
  const Matrix m = gen_low_rank_block(200, 100, rank, SpectrumSpec::flat(10.0), 5);
  std::vector<Observation> obs;
  Rng rng(11);
  for (std::size_t r = 0; r < 200; ++r)
    for (std::size_t c = 0; c < 100; ++c)
      if (rng.uniform() < 0.3)
        obs.push_back({r, c, m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))});
  SgdConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(sgd_factor_block(obs, 200, 100, rank, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(obs.size()));
}
BENCHMARK(BM_SgdEpoch)->Arg(2)->Arg(8)->Arg(32);

void BM_AssembleReconstruct(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  RankGrid ranks(k, k, 4);
  BlockGrid<Matrix> w(k, k), v(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      w(i, j) = Matrix::Random(100, 4);
      v(i, j) = Matrix::Random(100, 4);
    }
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct(assemble_md(w, v, ranks)));
}
BENCHMARK(BM_AssembleReconstruct)->Arg(2)->Arg(4);

}  // namespace

BENCHMARK_MAIN();
