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

// mdembed: sizing, blocking, synthesis, training and sweeps from the shell.
// Exit status: 0 on success, 2 on invalid input, 3 on an infeasible request.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mdembed/blocking.hpp"
#include "mdembed/factorize.hpp"
#include "mdembed/io.hpp"
#include "mdembed/linalg.hpp"
#include "mdembed/sizing.hpp"
#include "mdembed/sweep.hpp"
#include "mdembed/synth.hpp"

namespace fs = std::filesystem;
using namespace mdembed;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string out;
};

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty())
    std::cout << text;
  else
    write_text(g.out, text);
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  auto p = out;
  p.replace_extension();
  p += suffix;
  return p;
}

const std::map<std::string, RoundMode> kRoundModes{
    {"floor", RoundMode::kFloor}, {"nearest", RoundMode::kNearest}, {"pow2", RoundMode::kPow2}};

const std::map<std::string, ProbabilityMode> kProbabilityModes{{"block_mass", ProbabilityMode::kBlockMass},
                                                               {"row_average", ProbabilityMode::kRowAverage},
                                                               {"feature", ProbabilityMode::kFeature}};

// ---------------------------------------------------------------------------

struct SizeArgs {
  std::string freqs, blocks, pi;
  std::size_t k = BlockingConfig{}.blocks;
  double alpha = 0.0;
  std::size_t base_dim = 0;
  std::int64_t budget = 0;
  std::string round = "none";
  std::string probability = "row_average";
};

void run_size(const Globals& g, const SizeArgs& a) {
  const auto mode = kProbabilityModes.at(a.probability);
  if (!a.freqs.empty()) {
    const auto input = frequencies_from_csv(read_text(a.freqs));
    const auto part = partition_by_frequency(input.table, a.k);
    Vector p(static_cast<Eigen::Index>(part.sizes.size()));
    for (std::size_t i = 0; i < part.sizes.size(); ++i) {
      const double n = static_cast<double>(part.sizes[i]);
      const double mass = part.masses[i];
      p(static_cast<Eigen::Index>(i)) = mode == ProbabilityMode::kBlockMass ? mass
                                        : mode == ProbabilityMode::kRowAverage ? mass / n
                                                                               : 1.0 / n;
    }
    if (a.base_dim == 0) throw DomainError("size --freqs needs --base-dim");
    MDLayout layout = power_law_sizing(p, a.base_dim, a.alpha);
    if (a.round != "none") layout = round_dims(layout, kRoundModes.at(a.round));
    emit(g, layout_to_json(layout));
    return;
  }
  if (a.blocks.empty() || a.pi.empty()) throw DomainError("size needs --freqs, or --blocks with --pi");
  const auto st = structure_from_json(read_text(a.blocks));
  const auto pi = pi_from_csv(read_text(a.pi));
  pi.check_shape(st);
  const Vector row_p = block_probabilities(st, pi, mode);
  if (a.budget > 0) {
    const BlockStructure tr(st.col_sizes(), st.row_sizes());
    const Vector col_p = block_probabilities(tr, ProbabilityMatrix(pi.matrix().transpose()), mode);
    const auto round = a.round == "none" ? RoundMode::kNearest : kRoundModes.at(a.round);
    const auto fit = fit_power_law_to_budget(row_p, col_p, st.row_sizes(), st.col_sizes(), a.alpha, a.budget, round);
    if (!fit) throw InfeasibleError("budget " + std::to_string(a.budget) + " cannot give every block dimension >= 1");
    const json doc = {{"rows", json::parse(layout_to_json(fit->rows))},
                      {"cols", json::parse(layout_to_json(fit->cols))},
                      {"params", fit->params}};
    emit(g, doc.dump(2) + "\n");
    return;
  }
  if (a.base_dim == 0) throw DomainError("size needs --base-dim or --budget");
  MDLayout layout = power_law_sizing(row_p, a.base_dim, a.alpha);
  if (a.round != "none") layout = round_dims(layout, kRoundModes.at(a.round));
  emit(g, layout_to_json(layout));
}

// ---------------------------------------------------------------------------

struct OptimalArgs {
  std::string spectra, pi, blocks;
  std::int64_t budget = 0;
  bool power_law = false;
};

void run_optimal(const Globals& g, const OptimalArgs& a) {
  const auto spectra = spectra_from_csv(read_text(a.spectra));
  const auto pi = pi_from_csv(read_text(a.pi));
  const auto st = structure_from_json(read_text(a.blocks));
  if (!a.power_law) {
    emit(g, sizing_to_json(optimal_dims(spectra, pi, st, a.budget)));
    return;
  }
  // Fit rho per block and share the mean decay exponent.
  BlockGrid<PowerLawBlock> blocks(spectra.rows(), spectra.cols());
  double beta_sum = 0.0;
  std::size_t fitted = 0;
  for (std::size_t c = 0; c < spectra.size(); ++c) {
    blocks.cells()[c].rank = spectra.cells()[c].size();
    if (const auto f = power_fit(spectra.cells()[c])) {
      beta_sum += f->beta;
      ++fitted;
    }
  }
  if (fitted == 0) throw DegenerateInputError("no block has enough singular values for a power-law fit");
  const double beta = beta_sum / static_cast<double>(fitted);
  for (std::size_t c = 0; c < spectra.size(); ++c) {
    blocks.cells()[c].beta = beta;
    blocks.cells()[c].rho = spectra.cells()[c].empty() ? 0.0 : spectra.cells()[c].front();
  }
  emit(g, sizing_to_json(optimal_dims_power_law(blocks, pi, st, a.budget)));
}

// ---------------------------------------------------------------------------

struct BlockArgs {
  std::string freqs;
  std::size_t k = BlockingConfig{}.blocks;
};

void run_block(const Globals& g, const BlockArgs& a) {
  const auto input = frequencies_from_csv(read_text(a.freqs));
  emit(g, partition_to_json(partition_by_frequency(input.table, a.k), input.ids));
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec;
};

void run_synth(const Globals& g, const SynthArgs& a) {
  if (g.out.empty()) throw DomainError("synth needs --out for the matrix CSV");
  auto doc = synth_from_json(read_text(a.spec));
  if (g.seed) doc.spec.seed = *g.seed;
  const auto target = gen_rank_additive(doc.spec);
  Spectra spectra(doc.spec.block_ranks.rows(), doc.spec.block_ranks.cols());
  for (std::size_t i = 0; i < spectra.rows(); ++i)
    for (std::size_t j = 0; j < spectra.cols(); ++j)
      spectra(i, j) = doc.spec.spectra(i, j).values(doc.spec.block_ranks(i, j));
  const fs::path out = g.out;
  write_text(out, matrix_to_csv(target.data));
  write_text(sibling(out, ".sidecar.json"), sidecar_to_json(target, spectra, doc.spec.seed));
  write_text(sibling(out, ".blocks.json"), structure_to_json(target.structure));
  write_text(sibling(out, ".ranks.json"), ranks_to_json(target.block_ranks));
  write_text(sibling(out, ".spectra.csv"), spectra_to_csv(spectra));
  if (doc.pi) write_text(sibling(out, ".pi.csv"), pi_to_csv(*doc.pi));
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string matrix, pi, blocks, ranks, row_layout, col_layout, reconstruction;
  std::optional<std::size_t> ud_rank;
  double samples = 0.0;
  SgdConfig sgd;
  double recovery_tol = 1e-3;
  bool record_time = false;
};

void run_train(const Globals& g, TrainArgs a) {
  TargetBlockMatrix target;
  target.data = matrix_from_csv(read_text(a.matrix));
  target.structure = structure_from_json(read_text(a.blocks));
  if (target.data.rows() != static_cast<Eigen::Index>(target.structure.rows()) ||
      target.data.cols() != static_cast<Eigen::Index>(target.structure.cols()))
    throw StructuralError("matrix shape does not match the block structure");
  const auto pi = pi_from_csv(read_text(a.pi));

  const int choices = (a.ud_rank ? 1 : 0) + (a.ranks.empty() ? 0 : 1) + (a.row_layout.empty() ? 0 : 1);
  if (choices != 1) throw DomainError("train needs exactly one of --ranks, --ud-rank or --row-layout");
  TrainModel model;
  if (a.ud_rank) {
    model = ud_model(target.structure.rows(), target.structure.cols(), *a.ud_rank);
  } else if (!a.ranks.empty()) {
    model = md_model(target.structure, ranks_from_json(read_text(a.ranks)));
  } else {
    if (a.col_layout.empty()) throw DomainError("--row-layout needs --col-layout");
    model = LayerModel{layout_from_json(read_text(a.row_layout)), layout_from_json(read_text(a.col_layout))};
  }

  PipelineConfig cfg;
  cfg.sgd = a.sgd;
  cfg.sgd.seed = g.seed.value_or(0);
  cfg.threads = g.threads;
  cfg.recovery_tol = a.recovery_tol;
  cfg.keep_reconstruction = !a.reconstruction.empty();
  const auto report = train_pipeline(target, pi, a.samples, model, cfg);
  if (report.reconstruction) write_text(a.reconstruction, matrix_to_csv(*report.reconstruction));
  emit(g, report_to_json(report, a.record_time));
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string matrix, estimate, pi, blocks;
  double tol = 1e-3;
};

void run_eval(const Globals& g, const EvalArgs& a) {
  TargetBlockMatrix target;
  target.data = matrix_from_csv(read_text(a.matrix));
  target.structure = structure_from_json(read_text(a.blocks));
  const Matrix estimate = matrix_from_csv(read_text(a.estimate));
  const auto pi = pi_from_csv(read_text(a.pi));
  const double loss = weighted_mse(target.data, estimate, pi, target.structure);
  const auto ranks = rank_additive_check(target);
  const auto diag = block_diagnostics(target);
  const auto profile = spectral_profile(target);

  auto grid = [](const auto& g2, auto fn) {
    json rows = json::array();
    for (std::size_t i = 0; i < g2.rows(); ++i) {
      json row = json::array();
      for (std::size_t j = 0; j < g2.cols(); ++j) row.push_back(fn(g2(i, j)));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  auto same = [](const auto& v) { return v; };
  const json doc = {
      {"weighted_mse", loss},
      {"relative_error", relative_frobenius_error(target.data, estimate)},
      {"recovered", recovered(target.data, estimate, a.tol)},
      {"rank", ranks.total_rank},
      {"block_ranks", grid(ranks.block_ranks, same)},
      {"rank_additive", ranks.additive},
      {"incoherence", grid(diag.incoherence, same)},
      {"condition", grid(diag.condition, same)},
      {"aspect", grid(diag.aspect, same)},
      {"power_fits", grid(profile.fits, [](const std::optional<PowerFit>& f) {
         return f ? json{{"rho", f->rho}, {"beta", f->beta}, {"residual", f->residual}} : json(nullptr);
       })}};
  emit(g, doc.dump(2) + "\n");
}

// ---------------------------------------------------------------------------

struct SweepArgs {
  std::string config;
};

void run_sweep_cmd(const Globals& g, const SweepArgs& a) {
  if (g.out.empty()) throw DomainError("sweep needs --out for the results CSV");
  SweepConfig cfg = sweep_config_from_json(read_text(a.config));
  if (g.seed) cfg.seed = *g.seed;
  cfg.threads = g.threads;
  write_sweep(run_sweep(cfg), g.out);
}

void add_sgd_flags(CLI::App* cmd, SgdConfig& sgd) {
  cmd->add_option("--lr", sgd.learning_rate, "SGD learning rate")->capture_default_str();
  cmd->add_option("--epochs", sgd.epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--batch-size", sgd.batch_size, "Minibatch size")->capture_default_str();
  cmd->add_option("--init-scale", sgd.init_scale, "Factor init scale")->capture_default_str();
  cmd->add_option("--tol", sgd.convergence_tol, "Relative plateau tolerance")->capture_default_str();
  cmd->add_option("--plateau", sgd.max_plateau_epochs, "Epochs within tolerance before stopping")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-dimension embeddings: sizing, blocking, synthesis and training"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Base seed for every random stream");
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--out", g.out, "Output file (stdout when omitted)");

  std::vector<std::string> round_names{"none", "floor", "nearest", "pow2"};
  std::vector<std::string> prob_names{"block_mass", "row_average", "feature"};

  SizeArgs size;
  auto* size_cmd = app.add_subcommand("size", "Popularity-based block dimensions");
  size_cmd->add_option("--freqs", size.freqs, "Frequency CSV (id,count)")->check(CLI::ExistingFile);
  size_cmd->add_option("--k", size.k, "Blocks for --freqs")->capture_default_str();
  size_cmd->add_option("--blocks", size.blocks, "Block structure JSON")->check(CLI::ExistingFile);
  size_cmd->add_option("--pi", size.pi, "Block probability CSV")->check(CLI::ExistingFile);
  size_cmd->add_option("--alpha", size.alpha, "Temperature")->check(CLI::NonNegativeNumber)->capture_default_str();
  size_cmd->add_option("--base-dim", size.base_dim, "Base dimension");
  size_cmd->add_option("--budget", size.budget, "Parameter budget (with --blocks/--pi)");
  size_cmd->add_option("--round", size.round, "Rounding")->check(CLI::IsMember(round_names))->capture_default_str();
  size_cmd->add_option("--probability", size.probability, "Block popularity")
      ->check(CLI::IsMember(prob_names))
      ->capture_default_str();

  OptimalArgs opt;
  auto* opt_cmd = app.add_subcommand("optimal-size", "Spectrum-driven dimension allocation");
  opt_cmd->add_option("--spectra", opt.spectra, "Spectra CSV")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--pi", opt.pi, "Block probability CSV")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--blocks", opt.blocks, "Block structure JSON")->required()->check(CLI::ExistingFile);
  opt_cmd->add_option("--budget", opt.budget, "Parameter budget")->required();
  opt_cmd->add_flag("--power-law", opt.power_law, "Use the power-law closed form on fitted spectra");

  BlockArgs blk;
  auto* blk_cmd = app.add_subcommand("block", "Frequency equipartition into blocks");
  blk_cmd->add_option("--freqs", blk.freqs, "Frequency CSV (id,count)")->required()->check(CLI::ExistingFile);
  blk_cmd->add_option("--k", blk.k, "Number of blocks")->capture_default_str();

  SynthArgs syn;
  auto* syn_cmd = app.add_subcommand("synth", "Generate a rank-additive block matrix");
  syn_cmd->add_option("--spec", syn.spec, "Synthesis spec JSON")->required()->check(CLI::ExistingFile);

  TrainArgs tr;
  auto* tr_cmd = app.add_subcommand("train", "Sample, factorize and evaluate");
  tr_cmd->add_option("--matrix", tr.matrix, "Target matrix CSV")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--pi", tr.pi, "Block probability CSV")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--blocks", tr.blocks, "Block structure JSON")->required()->check(CLI::ExistingFile);
  tr_cmd->add_option("--ranks", tr.ranks, "Per-block ranks JSON")->check(CLI::ExistingFile);
  tr_cmd->add_option("--ud-rank", tr.ud_rank, "Single rank over the whole matrix");
  tr_cmd->add_option("--row-layout", tr.row_layout, "Row layout JSON (layer model)")->check(CLI::ExistingFile);
  tr_cmd->add_option("--col-layout", tr.col_layout, "Column layout JSON (layer model)")->check(CLI::ExistingFile);
  tr_cmd->add_option("--n-samples", tr.samples, "Expected observation count")->required();
  tr_cmd->add_option("--recovery-tol", tr.recovery_tol, "Relative Frobenius recovery threshold")
      ->capture_default_str();
  tr_cmd->add_option("--reconstruction", tr.reconstruction, "Write the estimate to this CSV");
  tr_cmd->add_flag("--record-time", tr.record_time, "Include wall time in the report");
  add_sgd_flags(tr_cmd, tr.sgd);

  EvalArgs ev;
  auto* ev_cmd = app.add_subcommand("eval", "Score an estimate against a target");
  ev_cmd->add_option("--matrix", ev.matrix, "Target matrix CSV")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--estimate", ev.estimate, "Estimate CSV")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--pi", ev.pi, "Block probability CSV")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--blocks", ev.blocks, "Block structure JSON")->required()->check(CLI::ExistingFile);
  ev_cmd->add_option("--recovery-tol", ev.tol, "Relative Frobenius recovery threshold")->capture_default_str();

  SweepArgs sw;
  auto* sw_cmd = app.add_subcommand("sweep", "Alpha x budget x samples grid");
  sw_cmd->add_option("--config", sw.config, "Sweep config JSON")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*size_cmd) run_size(g, size);
    if (*opt_cmd) run_optimal(g, opt);
    if (*blk_cmd) run_block(g, blk);
    if (*syn_cmd) run_synth(g, syn);
    if (*tr_cmd) run_train(g, tr);
    if (*ev_cmd) run_eval(g, ev);
    if (*sw_cmd) run_sweep_cmd(g, sw);
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
