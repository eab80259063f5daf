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

#include "mdembed/sweep.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mdembed/rng.hpp"
#include "parallel.hpp"

namespace mdembed {

using nlohmann::json;

namespace {

double dsize(std::size_t v) { return static_cast<double>(v); }

struct Scene {
  TargetBlockMatrix target;
  ProbabilityMatrix pi;
};

Scene make_scene(const SweepScenario& scenario, std::uint64_t seed) {
  if (scenario.kind == SweepScenario::Kind::kTwoBlock) {
    TwoBlockParams p = scenario.two_block;
    p.seed = seed;
    auto s = gen_two_block_scenario(p);
    return {std::move(s.target), std::move(s.pi)};
  }
  if (!scenario.synth.pi) throw StructuralError("synth sweep scenario needs pi");
  SynthSpec spec = scenario.synth.spec;
  spec.seed = seed;
  return {gen_rank_additive(spec), *scenario.synth.pi};
}

const char* status_name(CellStatus s) {
  switch (s) {
    case CellStatus::kOk:
      return "ok";
    case CellStatus::kInfeasible:
      return "infeasible";
    case CellStatus::kDiverged:
      return "diverged";
  }
  return "";
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  out.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / dsize(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / dsize(xs.size() - 1));
  }
  return out;
}

template <class T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key)) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw StructuralError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

SpectrumSpec spectrum_from(const json& doc) {
  const auto kind = get_or<std::string>(doc, "kind", "");
  if (kind == "power") return SpectrumSpec::power(get_or(doc, "rho", 1.0), get_or(doc, "beta", 0.0));
  if (kind == "flat") return SpectrumSpec::flat(get_or(doc, "level", 1.0));
  if (kind == "explicit") return SpectrumSpec::explicit_values(get_or(doc, "sigma", std::vector<double>{}));
  throw StructuralError("unknown spectrum kind '" + kind + "'");
}

}  // namespace

void SweepConfig::validate() const {
  if (alphas.empty() || budgets.empty() || sample_sizes.empty()) throw DomainError("sweep grids must be nonempty");
  if (trials < 1) throw DomainError("trials must be >= 1");
  for (double a : alphas)
    if (!(a >= 0.0) || !std::isfinite(a)) throw DomainError("alpha must be finite and >= 0");
  for (auto b : budgets)
    if (b <= 0) throw DomainError("budgets must be positive");
  for (double n : sample_sizes)
    if (!(n >= 0.0) || !std::isfinite(n)) throw DomainError("sample sizes must be finite and >= 0");
  pipeline.sgd.validate();
}

SweepConfig sweep_config_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw StructuralError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw StructuralError("sweep config must be a JSON object");
  SweepConfig cfg;
  if (!doc.contains("scenario")) throw StructuralError("missing field 'scenario'");
  const json& sc = doc["scenario"];
  const auto kind = get_or<std::string>(sc, "kind", "two_block");
  if (kind == "two_block") {
    auto& p = cfg.scenario.two_block;
    p.rows_per_block = get_or(sc, "rows_per_block", p.rows_per_block);
    p.cols = get_or(sc, "cols", p.cols);
    p.popular_rank = get_or(sc, "popular_rank", p.popular_rank);
    p.rare_rank = get_or(sc, "rare_rank", p.rare_rank);
    p.eps = get_or(sc, "eps", p.eps);
    if (sc.contains("popular_spectrum")) p.popular_spectrum = spectrum_from(sc["popular_spectrum"]);
    if (sc.contains("rare_spectrum")) p.rare_spectrum = spectrum_from(sc["rare_spectrum"]);
  } else if (kind == "synth") {
    cfg.scenario.kind = SweepScenario::Kind::kSynth;
    if (!sc.contains("spec")) throw StructuralError("synth scenario needs 'spec'");
    cfg.scenario.synth = synth_from_json(sc["spec"].dump());
    if (!cfg.scenario.synth.pi) throw StructuralError("synth scenario spec needs 'pi'");
  } else {
    throw StructuralError("unknown scenario kind '" + kind + "'");
  }
  cfg.alphas = get_or(doc, "alphas", cfg.alphas);
  cfg.budgets = get_or(doc, "budgets", cfg.budgets);
  cfg.sample_sizes = get_or(doc, "n_samples", cfg.sample_sizes);
  cfg.trials = get_or(doc, "trials", cfg.trials);
  cfg.seed = get_or(doc, "seed", cfg.seed);
  const auto round = get_or<std::string>(doc, "round", "nearest");
  if (round == "floor")
    cfg.round = RoundMode::kFloor;
  else if (round == "nearest")
    cfg.round = RoundMode::kNearest;
  else if (round == "pow2")
    cfg.round = RoundMode::kPow2;
  else
    throw StructuralError("round must be floor, nearest or pow2");
  const auto prob = get_or<std::string>(doc, "probability", "row_average");
  if (prob == "block_mass")
    cfg.probability = ProbabilityMode::kBlockMass;
  else if (prob == "row_average")
    cfg.probability = ProbabilityMode::kRowAverage;
  else if (prob == "feature")
    cfg.probability = ProbabilityMode::kFeature;
  else
    throw StructuralError("probability must be block_mass, row_average or feature");
  if (doc.contains("sgd")) {
    const json& s = doc["sgd"];
    auto& g = cfg.pipeline.sgd;
    g.learning_rate = get_or(s, "learning_rate", g.learning_rate);
    g.epochs = get_or(s, "epochs", g.epochs);
    g.batch_size = get_or(s, "batch_size", g.batch_size);
    g.init_scale = get_or(s, "init_scale", g.init_scale);
    g.convergence_tol = get_or(s, "convergence_tol", g.convergence_tol);
    g.max_plateau_epochs = get_or(s, "max_plateau_epochs", g.max_plateau_epochs);
    g.min_relative_mse = get_or(s, "min_relative_mse", g.min_relative_mse);
  }
  cfg.pipeline.recovery_tol = get_or(doc, "recovery_tol", cfg.pipeline.recovery_tol);
  cfg.pipeline.test_fraction = get_or(doc, "test_fraction", cfg.pipeline.test_fraction);
  cfg.pipeline.max_test_entries = get_or(doc, "max_test_entries", cfg.pipeline.max_test_entries);
  cfg.validate();
  return cfg;
}

std::vector<std::size_t> mass_thirds(const BlockStructure& structure, const ProbabilityMatrix& pi) {
  pi.check_shape(structure);
  const Vector mass = pi.row_mass();
  std::vector<double> q(structure.rows());
  for (std::size_t i = 0; i < structure.row_blocks(); ++i)
    for (std::size_t k = 0; k < structure.row_sizes()[i]; ++k)
      q[structure.row_offsets()[i] + k] = mass(static_cast<Eigen::Index>(i)) / dsize(structure.row_sizes()[i]);
  std::vector<std::size_t> order(q.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q[a] > q[b]; });
  std::vector<std::size_t> third(q.size());
  double cum = 0.0;
  for (auto k : order) {
    // A row belongs to the third containing the midpoint of its mass.
    const double mid = cum + q[k] / 2.0;
    third[k] = std::min<std::size_t>(2, static_cast<std::size_t>(std::floor(3.0 * mid)));
    cum += q[k];
  }
  return third;
}

SweepResults run_sweep(const SweepConfig& cfg) {
  cfg.validate();
  std::vector<Scene> scenes(cfg.trials);
  detail::parallel_for(cfg.trials, cfg.threads,
                       [&](std::size_t t) { scenes[t] = make_scene(cfg.scenario, split_seed(cfg.seed, 0, t)); });

  SweepResults results;
  const auto& st = scenes.front().target.structure;
  results.mass_third = mass_thirds(st, scenes.front().pi);
  results.row_blocks = st.row_blocks();
  results.row_block.resize(st.rows());
  for (std::size_t k = 0; k < st.rows(); ++k) results.row_block[k] = st.row_block_of(k);

  const std::size_t na = cfg.alphas.size();
  const std::size_t nb = cfg.budgets.size();
  const std::size_t nn = cfg.sample_sizes.size();
  const std::size_t nt = cfg.trials;
  results.rows.resize(na * nb * nn * nt);

  detail::parallel_for(results.rows.size(), cfg.threads, [&](std::size_t c) {
    const std::size_t t = c % nt;
    const std::size_t n_idx = (c / nt) % nn;
    const std::size_t b_idx = (c / (nt * nn)) % nb;
    const std::size_t a_idx = c / (nt * nn * nb);
    SweepRow& row = results.rows[c];
    row.alpha = cfg.alphas[a_idx];
    row.budget = cfg.budgets[b_idx];
    row.samples = cfg.sample_sizes[n_idx];
    row.trial = t;

    const Scene& scene = scenes[t];
    const auto& s = scene.target.structure;
    const Vector row_p = block_probabilities(s, scene.pi, cfg.probability);
    const BlockStructure transposed(s.col_sizes(), s.row_sizes());
    const Vector col_p =
        block_probabilities(transposed, ProbabilityMatrix(scene.pi.matrix().transpose()), cfg.probability);
    const auto layouts =
        fit_power_law_to_budget(row_p, col_p, s.row_sizes(), s.col_sizes(), row.alpha, row.budget, cfg.round);
    if (!layouts) {
      row.status = CellStatus::kInfeasible;
      return;
    }
    row.base_dim = layouts->rows.base_dim;
    row.params = layouts->params;
    row.row_dims = layouts->rows.int_dims();

    PipelineConfig pc = cfg.pipeline;
    pc.threads = 1;
    pc.sgd.seed = split_seed(split_seed(cfg.seed, 1, t), std::bit_cast<std::uint64_t>(row.samples));
    try {
      row.report = train_pipeline(scene.target, scene.pi, row.samples, LayerModel{layouts->rows, layouts->cols}, pc);
    } catch (const InfeasibleError&) {
      row.status = CellStatus::kInfeasible;
    } catch (const DomainError&) {
      row.status = CellStatus::kDiverged;
    }
  });
  return results;
}

std::vector<PartitionCell> popularity_partition_report(const SweepResults& results, PartitionRule rule) {
  const std::size_t parts = rule == PartitionRule::kMassThirds ? 3 : results.row_blocks;
  const auto& label = rule == PartitionRule::kMassThirds ? results.mass_third : results.row_block;
  std::vector<PartitionCell> out;
  std::size_t r = 0;
  while (r < results.rows.size()) {
    const auto& head = results.rows[r];
    std::vector<std::vector<double>> per_trial(parts);
    std::vector<std::size_t> entries(parts, 0);
    for (; r < results.rows.size(); ++r) {
      const auto& row = results.rows[r];
      if (row.alpha != head.alpha || row.budget != head.budget || row.samples != head.samples) break;
      if (row.status != CellStatus::kOk) continue;
      std::vector<double> sum(parts, 0.0);
      std::vector<std::size_t> count(parts, 0);
      for (const auto& e : row.report.test_entries) {
        sum[label[e.row]] += e.squared_error();
        ++count[label[e.row]];
      }
      for (std::size_t p = 0; p < parts; ++p) {
        if (count[p] == 0) continue;
        per_trial[p].push_back(sum[p] / dsize(count[p]));
        entries[p] += count[p];
      }
    }
    for (std::size_t p = 0; p < parts; ++p) {
      const auto ms = mean_std(per_trial[p]);
      out.push_back({head.alpha, head.budget, head.samples, p, per_trial[p].size(), ms.mean, ms.std, entries[p]});
    }
  }
  return out;
}

std::string partition_report_csv(const std::vector<PartitionCell>& cells, PartitionRule rule) {
  std::string out = "rule,alpha,budget,n_samples,partition,trials,mean_mse,std_mse,entries\n";
  const char* name = rule == PartitionRule::kMassThirds ? "mass_thirds" : "blocks";
  for (const auto& c : cells)
    out += std::string(name) + ',' + format_double(c.alpha) + ',' + std::to_string(c.budget) + ',' +
           format_double(c.samples) + ',' + std::to_string(c.partition) + ',' + std::to_string(c.trials) + ',' +
           (c.trials ? format_double(c.mean_mse) : "") + ',' + (c.trials ? format_double(c.std_mse) : "") + ',' +
           std::to_string(c.entries) + '\n';
  return out;
}

std::string sweep_results_csv(const SweepResults& results) {
  std::string out =
      "alpha,budget,n_samples,trial,status,base_dim,params,row_dims,observed,weighted_mse,test_mse,"
      "relative_error,recovered\n";
  for (const auto& row : results.rows) {
    out += format_double(row.alpha) + ',' + std::to_string(row.budget) + ',' + format_double(row.samples) + ',' +
           std::to_string(row.trial) + ',' + status_name(row.status) + ',';
    if (row.status == CellStatus::kInfeasible && row.row_dims.empty()) {
      out += ",,,,,,,\n";
      continue;
    }
    std::string dims;
    for (std::size_t i = 0; i < row.row_dims.size(); ++i) dims += (i ? ";" : "") + std::to_string(row.row_dims[i]);
    out += std::to_string(row.base_dim) + ',' + std::to_string(row.params) + ',' + dims + ',';
    if (row.status != CellStatus::kOk) {
      out += ",,,,\n";
      continue;
    }
    const auto& r = row.report;
    out += std::to_string(r.observed) + ',' + format_double(r.weighted_mse) + ',' + format_double(r.test_mse) + ',' +
           format_double(r.relative_error) + ',' + (r.recovered ? "1" : "0") + '\n';
  }
  return out;
}

std::string sweep_summary_json(const SweepResults& results) {
  json cells = json::array();
  std::size_t r = 0;
  while (r < results.rows.size()) {
    const auto& head = results.rows[r];
    std::vector<double> wmse, tmse, rel;
    std::size_t rec = 0, ok = 0, count = 0;
    for (; r < results.rows.size(); ++r) {
      const auto& row = results.rows[r];
      if (row.alpha != head.alpha || row.budget != head.budget || row.samples != head.samples) break;
      ++count;
      if (row.status != CellStatus::kOk) continue;
      ++ok;
      wmse.push_back(row.report.weighted_mse);
      tmse.push_back(row.report.test_mse);
      rel.push_back(row.report.relative_error);
      rec += row.report.recovered ? 1 : 0;
    }
    const auto w = mean_std(wmse);
    const auto t = mean_std(tmse);
    const auto e = mean_std(rel);
    json cell = {{"alpha", head.alpha},
                 {"budget", head.budget},
                 {"n_samples", head.samples},
                 {"trials", count},
                 {"feasible_trials", ok}};
    if (ok > 0) {
      cell["weighted_mse"] = {{"mean", w.mean}, {"std", w.std}};
      cell["test_mse"] = {{"mean", t.mean}, {"std", t.std}};
      cell["relative_error"] = {{"mean", e.mean}, {"std", e.std}};
      cell["recovery_rate"] = dsize(rec) / dsize(ok);
    }
    cells.push_back(std::move(cell));
  }
  return json{{"cells", std::move(cells)}}.dump(2) + "\n";
}

std::string sweep_timing_csv(const SweepResults& results) {
  std::string out = "alpha,budget,n_samples,trial,wall_seconds\n";
  for (const auto& row : results.rows)
    out += format_double(row.alpha) + ',' + std::to_string(row.budget) + ',' + format_double(row.samples) + ',' +
           std::to_string(row.trial) + ',' + format_double(row.report.wall_seconds) + '\n';
  return out;
}

void write_sweep(const SweepResults& results, const std::filesystem::path& out) {
  auto sibling = [&](const char* suffix) {
    auto p = out;
    p.replace_extension();
    p += suffix;
    return p;
  };
  write_text(out, sweep_results_csv(results));
  write_text(sibling(".summary.json"), sweep_summary_json(results));
  const std::string blocks =
      partition_report_csv(popularity_partition_report(results, PartitionRule::kBlocks), PartitionRule::kBlocks);
  write_text(sibling(".partitions.csv"),
             partition_report_csv(popularity_partition_report(results, PartitionRule::kMassThirds),
                                  PartitionRule::kMassThirds) +
                 blocks.substr(blocks.find('\n') + 1));
  write_text(sibling(".timing.csv"), sweep_timing_csv(results));
}

}  // namespace mdembed
