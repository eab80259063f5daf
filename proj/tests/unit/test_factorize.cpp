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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "mdembed/factorize.hpp"
#include "mdembed/linalg.hpp"
#include "mdembed/rng.hpp"
#include "mdembed/synth.hpp"

namespace {

using namespace mdembed;

ProbabilityMatrix pi_of(std::initializer_list<std::initializer_list<double>> rows) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double x : r) m(i, j++) = x;
    ++i;
  }
  return ProbabilityMatrix(m);
}

TargetBlockMatrix small_target(std::uint64_t seed = 1) {
  TwoBlockParams p;
  p.rows_per_block = 12;
  p.cols = 10;
  p.popular_rank = 3;
  p.rare_rank = 1;
  p.eps = 0.25;
  p.seed = seed;
  return gen_two_block_scenario(p).target;
}

Matrix random_matrix(Rng& rng, Eigen::Index n, Eigen::Index m) {
  Matrix out(n, m);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.normal();
  return out;
}

// ---------------------------------------------------------------------------

TEST(Sampler, ZeroCountObservesNothing) {
  const auto t = small_target();
  EXPECT_TRUE(sample_observations(t, pi_of({{0.75}, {0.25}}), 0.0, 3).entries.empty());
}

TEST(Sampler, FullRateObservesEverything) {
  const auto t = small_target();
  const auto pi = ProbabilityMatrix::uniform(t.structure);
  const auto obs = sample_observations(t, pi, 240.0, 3);
  ASSERT_EQ(obs.entries.size(), 240u);
  for (const auto& o : obs.entries) EXPECT_EQ(o.value, t.data(static_cast<Eigen::Index>(o.row), static_cast<Eigen::Index>(o.col)));
}

TEST(Sampler, RateAboveOneIsInfeasible) {
  const auto t = small_target();
  EXPECT_THROW(sample_observations(t, pi_of({{0.75}, {0.25}}), 200.0, 3), InfeasibleError);
  EXPECT_THROW(sample_observations(t, pi_of({{0.75}, {0.25}}), -1.0, 3), DomainError);
}

TEST(Sampler, CountsFollowBinomialMean) {
  const auto t = small_target();
  const auto pi = pi_of({{0.75}, {0.25}});
  const double n = 100.0;
  double total = 0.0, popular = 0.0;
  const int seeds = 50;
  for (int s = 0; s < seeds; ++s) {
    const auto obs = sample_observations(t, pi, n, static_cast<std::uint64_t>(s));
    total += static_cast<double>(obs.entries.size());
    for (const auto& o : obs.entries) popular += o.row < 12;
  }
  // Standard error of the mean total is about sqrt(100 * 0.6) / sqrt(50) ~ 1.1.
  EXPECT_NEAR(total / seeds, n, 5.0);
  EXPECT_NEAR(popular / seeds, 75.0, 5.0);
}

TEST(Sampler, PerEntryFrequencyMatchesRate) {
  const auto t = small_target();
  const auto pi = pi_of({{0.5}, {0.5}});
  std::vector<int> hits(240, 0);
  const int seeds = 2000;
  for (int s = 0; s < seeds; ++s)
    for (const auto& o : sample_observations(t, pi, 60.0, static_cast<std::uint64_t>(s)).entries) ++hits[o.row * 10 + o.col];
  // Each entry has rate 60 * 0.5 / 120 = 0.25; 5 sigma is about 0.048.
  for (int h : hits) ASSERT_NEAR(h / double(seeds), 0.25, 0.05);
}

TEST(Sampler, SortedAndDeterministic) {
  const auto t = small_target();
  const auto pi = pi_of({{0.75}, {0.25}});
  const auto a = sample_observations(t, pi, 80.0, 9);
  EXPECT_EQ(a.entries, sample_observations(t, pi, 80.0, 9).entries);
  for (std::size_t k = 1; k < a.entries.size(); ++k) {
    const auto& p = a.entries[k - 1];
    const auto& q = a.entries[k];
    ASSERT_TRUE(p.row < q.row || (p.row == q.row && p.col < q.col));
  }
}

TEST(SplitByBlock, LocalCoordinates) {
  BlockStructure st({2, 3}, {4, 1});
  const std::vector<Observation> obs{{0, 0, 1.0}, {1, 4, 2.0}, {2, 3, 3.0}, {4, 4, 4.0}};
  const auto g = split_by_block(obs, st);
  EXPECT_EQ(g(0, 0), (std::vector<Observation>{{0, 0, 1.0}}));
  EXPECT_EQ(g(0, 1), (std::vector<Observation>{{1, 0, 2.0}}));
  EXPECT_EQ(g(1, 0), (std::vector<Observation>{{0, 3, 3.0}}));
  EXPECT_EQ(g(1, 1), (std::vector<Observation>{{2, 0, 4.0}}));
}

// ---------------------------------------------------------------------------

TEST(LossGradient, MatchesFiniteDifferences) {
  Rng rng(4);
  Matrix w = random_matrix(rng, 5, 2), v = random_matrix(rng, 4, 2);
  std::vector<Observation> obs;
  for (std::size_t k = 0; k < 12; ++k) obs.push_back({rng.below(5), rng.below(4), rng.normal()});
  const auto g = observed_loss_gradient(obs, w, v);
  auto loss = [&]() { return observed_loss_gradient(obs, w, v).loss; };
  const double h = 1e-6;
  for (Matrix* m : {&w, &v}) {
    const Matrix& grad = m == &w ? g.grad_w : g.grad_v;
    for (Eigen::Index c = 0; c < m->size(); ++c) {
      const double saved = m->data()[c];
      m->data()[c] = saved + h;
      const double up = loss();
      m->data()[c] = saved - h;
      const double down = loss();
      m->data()[c] = saved;
      ASSERT_NEAR(grad.data()[c], (up - down) / (2 * h), 1e-6);
    }
  }
}

TEST(SgdFactorBlock, RecoversFullyObservedRankOne) {
  Rng rng(5);
  const Matrix a = random_matrix(rng, 8, 1), b = random_matrix(rng, 6, 1);
  const Matrix m = a * b.transpose();
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 6; ++j) obs.push_back({i, j, m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
  SgdConfig cfg;
  cfg.learning_rate = 0.02;
  cfg.epochs = 3000;
  cfg.seed = 2;
  const auto fit = sgd_factor_block(obs, 8, 6, 1, cfg);
  EXPECT_LT(relative_frobenius_error(m, fit.w * fit.v.transpose()), 1e-4);
  EXPECT_EQ(fit.trajectory.size(), fit.epochs_run);
  EXPECT_LT(fit.trajectory.back(), fit.trajectory.front());
}

TEST(SgdFactorBlock, MiniBatchAlsoConverges) {
  Rng rng(6);
  const Matrix m = random_matrix(rng, 6, 2) * random_matrix(rng, 5, 2).transpose();
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 5; ++j) obs.push_back({i, j, m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j))});
  SgdConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 4;
  cfg.epochs = 5000;
  cfg.seed = 3;
  const auto fit = sgd_factor_block(obs, 6, 5, 2, cfg);
  EXPECT_LT(relative_frobenius_error(m, fit.w * fit.v.transpose()), 1e-3);
}

TEST(SgdFactorBlock, EdgeCases) {
  SgdConfig cfg;
  const auto empty = sgd_factor_block({}, 4, 3, 2, cfg);
  EXPECT_EQ(empty.w.rows(), 4);
  EXPECT_EQ(empty.v.cols(), 2);
  const std::vector<Observation> obs{{0, 0, 3.0}, {1, 1, 4.0}};
  const auto zero = sgd_factor_block(obs, 2, 2, 0, cfg);
  EXPECT_DOUBLE_EQ(zero.observed_mse, 12.5);
  EXPECT_THROW(sgd_factor_block(obs, 2, 2, 3, cfg), StructuralError);
  EXPECT_THROW(sgd_factor_block(std::vector<Observation>{{2, 0, 1.0}}, 2, 2, 1, cfg), IndexError);
  cfg.learning_rate = 0.0;
  EXPECT_THROW(sgd_factor_block(obs, 2, 2, 1, cfg), DomainError);
}

TEST(SgdFactorBlock, DivergenceIsReported) {
  std::vector<Observation> obs;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) obs.push_back({i, j, 100.0});
  SgdConfig cfg;
  cfg.learning_rate = 10.0;
  cfg.epochs = 50;
  EXPECT_THROW(sgd_factor_block(obs, 4, 4, 2, cfg), DomainError);
}

TEST(SgdFactorBlock, DeterministicForSeed) {
  const std::vector<Observation> obs{{0, 0, 1.0}, {1, 1, 2.0}, {0, 1, 0.5}};
  SgdConfig cfg;
  cfg.seed = 8;
  cfg.epochs = 20;
  const auto a = sgd_factor_block(obs, 2, 2, 1, cfg);
  const auto b = sgd_factor_block(obs, 2, 2, 1, cfg);
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.trajectory, b.trajectory);
}

// ---------------------------------------------------------------------------

TEST(Assembly, OffsetsAreRowMajor) {
  RankGrid r(2, 2);
  r(0, 0) = 2;
  r(0, 1) = 1;
  r(1, 0) = 3;
  r(1, 1) = 4;
  EXPECT_EQ(assembly_offset(r, 0, 0), 0u);
  EXPECT_EQ(assembly_offset(r, 0, 1), 2u);
  EXPECT_EQ(assembly_offset(r, 1, 0), 3u);
  EXPECT_EQ(assembly_offset(r, 1, 1), 6u);
}

TEST(Assembly, TwoBlockProjectionPattern) {
  RankGrid r(2, 1);
  r(0, 0) = 2;
  r(1, 0) = 1;
  Rng rng(1);
  BlockGrid<Matrix> w(2, 1), v(2, 1);
  w(0, 0) = random_matrix(rng, 3, 2);
  w(1, 0) = random_matrix(rng, 4, 1);
  v(0, 0) = random_matrix(rng, 5, 2);
  v(1, 0) = random_matrix(rng, 5, 1);
  const auto fp = assemble_md(w, v, r);
  EXPECT_EQ(fp.total_rank, 3u);
  EXPECT_EQ(fp.row_projections[0], (Matrix(2, 3) << 1, 0, 0, 0, 1, 0).finished());
  EXPECT_EQ(fp.row_projections[1], (Matrix(1, 3) << 0, 0, 1).finished());
  EXPECT_EQ(fp.col_projections[0], Matrix::Identity(3, 3));
  EXPECT_EQ(fp.col_blocks[0].leftCols(2), v(0, 0));
}

// Every block of the reconstruction equals its own W_ij V_ij^T, the
// oracle being the product of the unassembled factors.
TEST(Assembly, ReconstructionMatchesPerBlockProducts) {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t kw = 1 + rng.below(3), kv = 1 + rng.below(3);
    std::vector<std::size_t> n(kw), m(kv);
    for (auto& x : n) x = 2 + rng.below(5);
    for (auto& x : m) x = 2 + rng.below(5);
    RankGrid r(kw, kv);
    for (auto& x : r.cells()) x = rng.below(3);
    BlockGrid<Matrix> w(kw, kv), v(kw, kv);
    for (std::size_t i = 0; i < kw; ++i)
      for (std::size_t j = 0; j < kv; ++j) {
        w(i, j) = random_matrix(rng, static_cast<Eigen::Index>(n[i]), static_cast<Eigen::Index>(r(i, j)));
        v(i, j) = random_matrix(rng, static_cast<Eigen::Index>(m[j]), static_cast<Eigen::Index>(r(i, j)));
      }
    const Matrix got = reconstruct(assemble_md(w, v, r));
    const BlockStructure st(n, m);
    for (std::size_t i = 0; i < kw; ++i)
      for (std::size_t j = 0; j < kv; ++j) {
        const Matrix want = w(i, j) * v(i, j).transpose();
        const Matrix blk = got.block(static_cast<Eigen::Index>(st.row_offsets()[i]),
                                     static_cast<Eigen::Index>(st.col_offsets()[j]), want.rows(), want.cols());
        ASSERT_LT((blk - want).cwiseAbs().maxCoeff(), 1e-10);
      }
  }
}

TEST(Assembly, RejectsMismatchedFactors) {
  RankGrid r(1, 2, 1);
  BlockGrid<Matrix> w(1, 2, Matrix::Zero(3, 1)), v(1, 2, Matrix::Zero(4, 1));
  v(0, 1) = Matrix::Zero(4, 2);
  EXPECT_THROW(assemble_md(w, v, r), StructuralError);
  v(0, 1) = Matrix::Zero(4, 1);
  w(0, 1) = Matrix::Zero(5, 1);
  EXPECT_THROW(assemble_md(w, v, r), StructuralError);
  EXPECT_THROW(reconstruct(FactorPair{}), StructuralError);
}

// ---------------------------------------------------------------------------

TEST(WeightedMse, MatchesMonteCarloEstimate) {
  Rng rng(3);
  BlockStructure st({4, 6}, {3, 5});
  const Matrix a = random_matrix(rng, 10, 8), b = random_matrix(rng, 10, 8);
  const auto pi = pi_of({{0.4, 0.1}, {0.2, 0.3}});
  const double exact = weighted_mse(a, b, pi, st);
  double sum = 0.0;
  const int draws = 200000;
  for (int k = 0; k < draws; ++k) {
    // Block by pi, then a uniform entry inside it.
    double u = rng.uniform();
    std::size_t c = 0;
    while (c < 3 && (u -= pi.matrix().data()[static_cast<Eigen::Index>((c % 2) * 2 + c / 2)]) >= 0) ++c;
    const std::size_t i = c / 2, j = c % 2;
    const auto row = st.row_offsets()[i] + rng.below(st.row_sizes()[i]);
    const auto col = st.col_offsets()[j] + rng.below(st.col_sizes()[j]);
    const double e = a(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) -
                     b(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col));
    sum += e * e;
  }
  EXPECT_NEAR(sum / draws, exact, 0.03 * exact);
}

TEST(WeightedMse, UniformPiIsPlainMse) {
  Rng rng(4);
  BlockStructure st({3, 7}, {2, 4});
  const Matrix a = random_matrix(rng, 10, 6), b = random_matrix(rng, 10, 6);
  EXPECT_NEAR(weighted_mse(a, b, ProbabilityMatrix::uniform(st), st), (a - b).squaredNorm() / 60.0, 1e-12);
}

TEST(Recovered, StrictThreshold) {
  Matrix a = Matrix::Constant(2, 2, 1.0), b = a;
  EXPECT_TRUE(recovered(a, b));
  b(0, 0) = 1.0 + 2e-3;  // relative error 1e-3 exactly
  EXPECT_FALSE(recovered(a, b, 1e-3));
  EXPECT_TRUE(recovered(a, b, 1.1e-3));
}

// ---------------------------------------------------------------------------

TEST(RankAdditiveCheck, AdditiveAndNonAdditive) {
  const auto t = small_target();
  const auto rep = rank_additive_check(t);
  EXPECT_EQ(rep.total_rank, 4u);
  EXPECT_EQ(rep.block_rank_sum, 4u);
  EXPECT_TRUE(rep.additive);
  // Repeating a rank-one block in both row blocks shares its row space.
  Matrix m(4, 2);
  m << 1, 2, 2, 4, 1, 2, 3, 6;
  const auto shared = rank_additive_check(m, BlockStructure({2, 2}, {2}));
  EXPECT_EQ(shared.total_rank, 1u);
  EXPECT_EQ(shared.block_rank_sum, 2u);
  EXPECT_FALSE(shared.additive);
}

TEST(Incoherence, Examples) {
  // A constant matrix has perfectly spread singular vectors.
  EXPECT_NEAR(incoherence(Matrix::Constant(5, 4, 2.0)), 1.0, 1e-12);
  Matrix spike = Matrix::Zero(6, 6);
  spike(2, 3) = 5.0;
  EXPECT_NEAR(incoherence(spike), 6.0, 1e-12);
  EXPECT_THROW(incoherence(Matrix::Zero(3, 3)), DegenerateInputError);
}

TEST(ConditionNumber, UsesNonzeroSpectrum) {
  Matrix d = Matrix::Zero(3, 3);
  d(0, 0) = 4;
  d(1, 1) = 0.5;
  EXPECT_NEAR(condition_number(d), 8.0, 1e-12);
  EXPECT_THROW(condition_number(Matrix::Zero(2, 2)), DegenerateInputError);
}

TEST(BlockDiagnostics, ZeroBlockReportsOne) {
  TargetBlockMatrix t;
  t.structure = BlockStructure({2, 3}, {4});
  t.data = Matrix::Zero(5, 4);
  t.data(0, 0) = 1.0;
  const auto d = block_diagnostics(t);
  EXPECT_EQ(d.incoherence(1, 0), 1.0);
  EXPECT_EQ(d.condition(1, 0), 1.0);
  EXPECT_EQ(d.aspect(0, 0), 2.0);
  EXPECT_NEAR(d.incoherence(0, 0), 4.0, 1e-12);
}

TEST(PowerFit, ExactPowerLaw) {
  std::vector<double> s;
  for (int k = 1; k <= 10; ++k) s.push_back(3.0 * std::pow(k, -0.7));
  const auto f = power_fit(s);
  ASSERT_TRUE(f);
  EXPECT_NEAR(f->rho, 3.0, 1e-12);
  EXPECT_NEAR(f->beta, 0.7, 1e-12);
  EXPECT_LT(f->residual, 1e-12);
  const auto flat = power_fit({2, 2, 2});
  EXPECT_NEAR(flat->beta, 0.0, 1e-12);
  EXPECT_FALSE(power_fit({1.0}));
  EXPECT_FALSE(power_fit({1.0, 0.0}));
}

TEST(PowerFit, RecoversGeneratedDecay) {
  for (double beta : {0.3, 0.8, 1.5}) {
    SynthSpec spec;
    spec.structure = BlockStructure({60}, {50});
    spec.block_ranks = RankGrid(1, 1, 20);
    spec.spectra = BlockGrid<SpectrumSpec>(1, 1, SpectrumSpec::power(10.0, beta));
    spec.seed = 4;
    const auto profile = spectral_profile(gen_rank_additive(spec));
    ASSERT_EQ(profile.sigma(0, 0).size(), 20u);
    EXPECT_NEAR(profile.fits(0, 0)->beta, beta, 0.05);
  }
}

// ---------------------------------------------------------------------------

PipelineConfig quick_config(std::uint64_t seed) {
  PipelineConfig cfg;
  cfg.sgd.learning_rate = 0.05;
  cfg.sgd.epochs = 3000;
  cfg.sgd.seed = seed;
  cfg.keep_reconstruction = true;
  return cfg;
}

TEST(Pipeline, FullObservationRecoversMdRanks) {
  const auto t = small_target(2);
  const auto pi = ProbabilityMatrix::uniform(t.structure);
  const auto rep = train_pipeline(t, pi, 240.0, md_model(t.structure, t.block_ranks), quick_config(1));
  EXPECT_EQ(rep.observed, 240u);
  EXPECT_TRUE(rep.recovered) << rep.relative_error;
  EXPECT_EQ(rep.trajectories.size(), 2u);
  EXPECT_TRUE(rep.test_entries.empty());  // everything was observed
}

TEST(Pipeline, NoSamplesGivesWeightedEnergy) {
  const auto t = small_target(3);
  const auto pi = pi_of({{0.75}, {0.25}});
  const double energy = 0.75 * t.block(0, 0).squaredNorm() / 120 + 0.25 * t.block(1, 0).squaredNorm() / 120;
  const auto rep = train_pipeline(t, pi, 0.0, md_model(t.structure, t.block_ranks), quick_config(1));
  EXPECT_EQ(rep.observed, 0u);
  EXPECT_NEAR(rep.weighted_mse, energy, 1e-12);
  LayerModel lm;
  lm.rows.dims = {3, 1};
  lm.rows.base_dim = 3;
  lm.cols.dims = {3};
  lm.cols.base_dim = 3;
  EXPECT_NEAR(train_pipeline(t, pi, 0.0, lm, quick_config(1)).weighted_mse, energy, 1e-12);
}

TEST(Pipeline, TooLowRankCannotRecover) {
  const auto t = small_target(4);
  const auto pi = ProbabilityMatrix::uniform(t.structure);
  const auto rep = train_pipeline(t, pi, 240.0, ud_model(24, 10, 3), quick_config(2));
  EXPECT_FALSE(rep.recovered);
  EXPECT_GT(rep.relative_error, 0.05);
}

TEST(Pipeline, DeterministicAcrossThreadCounts) {
  const auto t = small_target(5);
  const auto pi = pi_of({{0.75}, {0.25}});
  auto cfg = quick_config(3);
  cfg.sgd.epochs = 50;
  const auto a = train_pipeline(t, pi, 80.0, md_model(t.structure, t.block_ranks), cfg);
  cfg.threads = 4;
  const auto b = train_pipeline(t, pi, 80.0, md_model(t.structure, t.block_ranks), cfg);
  EXPECT_EQ(a.weighted_mse, b.weighted_mse);
  EXPECT_EQ(a.trajectories, b.trajectories);
  ASSERT_EQ(a.test_entries.size(), b.test_entries.size());
  for (std::size_t k = 0; k < a.test_entries.size(); ++k) EXPECT_EQ(a.test_entries[k].prediction, b.test_entries[k].prediction);
}

TEST(TestEntries, DisjointFromObservationsAndCapped) {
  const auto t = small_target(6);
  const auto pi = pi_of({{0.75}, {0.25}});
  const auto obs = sample_observations(t, pi, 80.0, 1);
  const auto test = draw_test_entries(t, pi, obs.entries, 50, 2);
  ASSERT_EQ(test.size(), 50u);
  std::vector<char> seen(240, 0);
  for (const auto& o : obs.entries) seen[o.row * 10 + o.col] = 1;
  for (const auto& e : test) {
    ASSERT_FALSE(seen[e.row * 10 + e.col]);
    seen[e.row * 10 + e.col] = 2;
  }
  EXPECT_LE(draw_test_entries(t, pi, obs.entries, 10000, 2).size(), 240u - obs.entries.size());
}

}  // namespace
