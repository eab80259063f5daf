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

#include "mdembed/io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace mdembed {

using nlohmann::json;

namespace {

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw StructuralError(std::string("invalid JSON: ") + e.what());
  }
}

template <class T>
T field(const json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key)) throw StructuralError(std::string("missing field '") + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw StructuralError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto at = line.find(sep, start);
    out.push_back(trim(line.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start)));
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(const std::string& text) {
  std::vector<std::string_view> out;
  for (auto line : split(text, '\n'))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::optional<double> to_double(std::string_view s) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

std::optional<std::size_t> to_index(std::string_view s) {
  std::size_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || s.empty()) return std::nullopt;
  return v;
}

// A header has no numeric cell; a row mixing text and numbers is bad data.
bool header_row(std::string_view line) {
  for (auto cell : split(line, ','))
    if (to_double(cell)) return false;
  return true;
}

template <class T>
BlockGrid<T> grid_from(const json& rows, const char* what) {
  if (!rows.is_array() || rows.empty() || !rows.front().is_array() || rows.front().empty())
    throw StructuralError(std::string(what) + " must be a nonempty array of nonempty arrays");
  BlockGrid<T> grid(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].is_array() || rows[i].size() != grid.cols())
      throw StructuralError(std::string(what) + " rows must all have the same length");
    for (std::size_t j = 0; j < grid.cols(); ++j) {
      try {
        grid(i, j) = rows[i][j].get<T>();
      } catch (const json::exception& e) {
        throw StructuralError(std::string(what) + " has a malformed entry: " + e.what());
      }
    }
  }
  return grid;
}

template <class T>
json grid_to(const BlockGrid<T>& grid) {
  json rows = json::array();
  for (std::size_t i = 0; i < grid.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < grid.cols(); ++j) row.push_back(grid(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json spectrum_to(const SpectrumSpec& s) {
  switch (s.kind) {
    case SpectrumSpec::Kind::kPower:
      return {{"kind", "power"}, {"rho", s.rho}, {"beta", s.beta}};
    case SpectrumSpec::Kind::kFlat:
      return {{"kind", "flat"}, {"level", s.level}};
    case SpectrumSpec::Kind::kExplicit:
      return {{"kind", "explicit"}, {"sigma", s.sigma}};
  }
  return {};
}

SpectrumSpec spectrum_from(const json& doc) {
  const auto kind = field<std::string>(doc, "kind");
  if (kind == "power") return SpectrumSpec::power(field<double>(doc, "rho"), field<double>(doc, "beta"));
  if (kind == "flat") return SpectrumSpec::flat(field<double>(doc, "level"));
  if (kind == "explicit") return SpectrumSpec::explicit_values(field<std::vector<double>>(doc, "sigma"));
  throw StructuralError("unknown spectrum kind '" + kind + "'");
}

json pi_to(const ProbabilityMatrix& pi) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < pi.matrix().rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < pi.matrix().cols(); ++j) row.push_back(pi.matrix()(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

ProbabilityMatrix pi_from(const json& rows) {
  const auto grid = grid_from<double>(rows, "pi");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(grid.rows()), static_cast<Eigen::Index>(grid.cols()));
  for (std::size_t i = 0; i < grid.rows(); ++i)
    for (std::size_t j = 0; j < grid.cols(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = grid(i, j);
  return ProbabilityMatrix(std::move(m));
}

json layout_to(const MDLayout& layout) {
  json doc = {{"dims", layout.dims},
              {"base_dim", layout.base_dim},
              {"temperature", layout.temperature},
              {"scale", layout.scale}};
  doc["budget"] = layout.budget ? json(*layout.budget) : json(nullptr);
  return doc;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw StructuralError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw StructuralError("failed writing '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw DomainError("cannot format number");
  return std::string(buf, ptr);
}

std::string matrix_to_csv(const Eigen::Ref<const Matrix>& m) {
  std::string out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(m(r, c));
    }
    out += '\n';
  }
  return out;
}

Matrix matrix_from_csv(const std::string& text) {
  auto lines = lines_of(text);
  if (!lines.empty() && header_row(lines.front())) lines.erase(lines.begin());
  if (lines.empty()) throw StructuralError("matrix CSV has no data rows");
  const std::size_t cols = split(lines.front(), ',').size();
  Matrix m(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto cells = split(lines[r], ',');
    if (cells.size() != cols) throw StructuralError("matrix CSV row " + std::to_string(r) + " has the wrong length");
    for (std::size_t c = 0; c < cols; ++c) {
      const auto v = to_double(cells[c]);
      if (!v) throw StructuralError("matrix CSV row " + std::to_string(r) + " has a non-numeric cell");
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = *v;
    }
  }
  return m;
}

std::string structure_to_json(const BlockStructure& structure) {
  return dump({{"row_sizes", structure.row_sizes()}, {"col_sizes", structure.col_sizes()}});
}

BlockStructure structure_from_json(const std::string& text) {
  const json doc = parse_json(text);
  return BlockStructure(field<std::vector<std::size_t>>(doc, "row_sizes"),
                        field<std::vector<std::size_t>>(doc, "col_sizes"));
}

ProbabilityMatrix pi_from_csv(const std::string& text) { return ProbabilityMatrix(matrix_from_csv(text)); }

std::string pi_to_csv(const ProbabilityMatrix& pi) { return matrix_to_csv(pi.matrix()); }

std::string ranks_to_json(const RankGrid& ranks) { return dump({{"ranks", grid_to(ranks)}}); }

RankGrid ranks_from_json(const std::string& text) {
  const json doc = parse_json(text);
  if (!doc.is_object() || !doc.contains("ranks")) throw StructuralError("missing field 'ranks'");
  return grid_from<std::size_t>(doc["ranks"], "ranks");
}

std::string layout_to_json(const MDLayout& layout) { return dump(layout_to(layout)); }

MDLayout layout_from_json(const std::string& text) {
  const json doc = parse_json(text);
  MDLayout layout;
  layout.dims = field<std::vector<double>>(doc, "dims");
  layout.base_dim = field<std::size_t>(doc, "base_dim");
  if (doc.contains("budget") && !doc["budget"].is_null()) layout.budget = field<std::int64_t>(doc, "budget");
  if (doc.contains("temperature")) layout.temperature = field<double>(doc, "temperature");
  if (doc.contains("scale")) layout.scale = field<double>(doc, "scale");
  return layout;
}

Spectra spectra_from_csv(const std::string& text) {
  auto lines = lines_of(text);
  if (!lines.empty() && header_row(lines.front())) lines.erase(lines.begin());
  if (lines.empty()) throw StructuralError("spectra CSV has no data rows");
  std::map<std::pair<std::size_t, std::size_t>, std::map<std::size_t, double>> cells;
  std::size_t kw = 0, kv = 0;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto parts = split(lines[r], ',');
    const auto bad = [&] { return StructuralError("spectra CSV row " + std::to_string(r) + " is malformed"); };
    if (parts.size() != 4) throw bad();
    const auto i = to_index(parts[0]);
    const auto j = to_index(parts[1]);
    const auto k = to_index(parts[2]);
    const auto s = to_double(parts[3]);
    if (!i || !j || !k || !s) throw bad();
    if (!cells[{*i, *j}].emplace(*k, *s).second)
      throw StructuralError("spectra CSV repeats index k for one block");
    kw = std::max(kw, *i + 1);
    kv = std::max(kv, *j + 1);
  }
  Spectra spectra(kw, kv);
  for (const auto& [key, values] : cells) {
    auto& sigma = spectra(key.first, key.second);
    for (const auto& [k, s] : values) {
      if (k != sigma.size()) throw StructuralError("spectra CSV indices k must run 0, 1, 2, ... per block");
      sigma.push_back(s);
    }
  }
  return spectra;
}

std::string spectra_to_csv(const Spectra& spectra) {
  std::string out = "block_i,block_j,k,sigma\n";
  for (std::size_t i = 0; i < spectra.rows(); ++i)
    for (std::size_t j = 0; j < spectra.cols(); ++j)
      for (std::size_t k = 0; k < spectra(i, j).size(); ++k)
        out += std::to_string(i) + ',' + std::to_string(j) + ',' + std::to_string(k) + ',' +
               format_double(spectra(i, j)[k]) + '\n';
  return out;
}

FrequencyInput frequencies_from_csv(const std::string& text) {
  auto lines = lines_of(text);
  if (!lines.empty()) {
    const auto parts = split(lines.front(), ',');
    if (parts.size() == 2 && !to_double(parts[1])) lines.erase(lines.begin());
  }
  FrequencyInput input;
  for (std::size_t r = 0; r < lines.size(); ++r) {
    const auto parts = split(lines[r], ',');
    const auto count = parts.size() == 2 ? to_double(parts[1]) : std::nullopt;
    if (!count) throw StructuralError("frequency CSV row " + std::to_string(r) + " must be id,count");
    input.ids.emplace_back(parts[0]);
    input.table.counts.push_back(*count);
  }
  input.table.validate();
  return input;
}

std::string partition_to_json(const FrequencyPartition& partition, const std::vector<std::string>& ids) {
  if (ids.size() != partition.permutation.size()) throw StructuralError("id list does not match the partition");
  std::vector<std::string> order;
  order.reserve(ids.size());
  for (auto p : partition.permutation) order.push_back(ids[p]);
  return dump({{"permutation", order},
               {"offsets", partition.offsets},
               {"sizes", partition.sizes},
               {"masses", partition.masses}});
}

std::string sizing_to_json(const SizingResult& result) {
  return dump({{"layout", layout_to(result.layout)},
               {"block_dims", grid_to(result.block_dims)},
               {"fractional_dims", grid_to(result.fractional_dims)},
               {"row_dims", result.row_dims},
               {"col_dims", result.col_dims},
               {"lambda", result.lambda},
               {"achieved_budget", result.achieved_budget},
               {"objective_bound", result.objective_bound}});
}

std::string report_to_json(const TrainReport& report, bool include_wall_time) {
  json blocks = json::array();
  for (std::size_t b = 0; b < report.trajectories.size(); ++b)
    blocks.push_back({{"label", report.trajectory_labels[b]},
                      {"final_observed_mse", report.final_observed_mse[b]},
                      {"trajectory", report.trajectories[b]}});
  json tests = json::array();
  for (const auto& t : report.test_entries) tests.push_back({t.row, t.col, t.value, t.prediction});
  json doc = {{"observed", report.observed},
              {"weighted_mse", report.weighted_mse},
              {"test_mse", report.test_mse},
              {"relative_error", report.relative_error},
              {"recovered", report.recovered},
              {"blocks", std::move(blocks)},
              {"test_entries", std::move(tests)}};
  if (include_wall_time) doc["wall_seconds"] = report.wall_seconds;
  return dump(doc);
}

SynthDocument synth_from_json(const std::string& text) {
  const json doc = parse_json(text);
  SynthDocument out;
  out.spec.structure = BlockStructure(field<std::vector<std::size_t>>(doc, "row_sizes"),
                                      field<std::vector<std::size_t>>(doc, "col_sizes"));
  const auto& st = out.spec.structure;
  if (!doc.contains("ranks")) throw StructuralError("missing field 'ranks'");
  out.spec.block_ranks = grid_from<std::size_t>(doc["ranks"], "ranks");
  if (out.spec.block_ranks.rows() != st.row_blocks() || out.spec.block_ranks.cols() != st.col_blocks())
    throw StructuralError("ranks grid does not match the block structure");

  out.spec.spectra = BlockGrid<SpectrumSpec>(st.row_blocks(), st.col_blocks());
  if (!doc.contains("spectra")) throw StructuralError("missing field 'spectra'");
  const json& spectra = doc["spectra"];
  if (spectra.is_object()) {
    const SpectrumSpec one = spectrum_from(spectra);
    for (auto& cell : out.spec.spectra.cells()) cell = one;
  } else {
    if (!spectra.is_array() || spectra.size() != st.row_blocks())
      throw StructuralError("spectra must be one spec or a k_W x k_V grid of specs");
    for (std::size_t i = 0; i < st.row_blocks(); ++i) {
      if (!spectra[i].is_array() || spectra[i].size() != st.col_blocks())
        throw StructuralError("spectra grid does not match the block structure");
      for (std::size_t j = 0; j < st.col_blocks(); ++j) out.spec.spectra(i, j) = spectrum_from(spectra[i][j]);
    }
  }
  if (doc.contains("seed")) out.spec.seed = field<std::uint64_t>(doc, "seed");
  if (doc.contains("pi")) {
    out.pi = pi_from(doc["pi"]);
    out.pi->check_shape(st);
  }
  return out;
}

std::string synth_to_json(const SynthDocument& doc) {
  const auto& spec = doc.spec;
  json spectra = json::array();
  for (std::size_t i = 0; i < spec.spectra.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < spec.spectra.cols(); ++j) row.push_back(spectrum_to(spec.spectra(i, j)));
    spectra.push_back(std::move(row));
  }
  json out = {{"row_sizes", spec.structure.row_sizes()},
              {"col_sizes", spec.structure.col_sizes()},
              {"ranks", grid_to(spec.block_ranks)},
              {"spectra", std::move(spectra)},
              {"seed", spec.seed}};
  if (doc.pi) out["pi"] = pi_to(*doc.pi);
  return dump(out);
}

std::string sidecar_to_json(const TargetBlockMatrix& target, const Spectra& spectra, std::uint64_t seed) {
  return dump({{"seed", seed},
               {"row_sizes", target.structure.row_sizes()},
               {"col_sizes", target.structure.col_sizes()},
               {"ranks", grid_to(target.block_ranks)},
               {"rank", target.rank},
               {"rank_additive", target.rank_additive},
               {"spectra", grid_to(spectra)}});
}

void save_layer(const MDEmbeddingLayer& layer, const std::filesystem::path& stem) {
  layer.validate();
  const std::string name = stem.filename().string();
  json blocks = json::array();
  json projections = json::array();
  for (std::size_t i = 0; i < layer.block_count(); ++i) {
    const std::string block_file = name + ".block" + std::to_string(i) + ".csv";
    write_text(stem.parent_path() / block_file, matrix_to_csv(layer.blocks[i]));
    blocks.push_back(block_file);
    if (layer.projections[i]) {
      const std::string proj_file = name + ".proj" + std::to_string(i) + ".csv";
      write_text(stem.parent_path() / proj_file, matrix_to_csv(*layer.projections[i]));
      projections.push_back(proj_file);
    } else {
      projections.push_back(nullptr);
    }
  }
  json header = {{"base_dim", layer.base_dim},
                 {"offsets", layer.offsets},
                 {"sizes", layer.block_sizes()},
                 {"dims", layer.dims()},
                 {"blocks", std::move(blocks)},
                 {"projections", std::move(projections)}};
  auto header_path = stem;
  header_path += ".json";
  write_text(header_path, dump(header));
}

MDEmbeddingLayer load_layer(const std::filesystem::path& stem) {
  auto header_path = stem;
  header_path += ".json";
  const json doc = parse_json(read_text(header_path));
  MDEmbeddingLayer layer;
  layer.base_dim = field<std::size_t>(doc, "base_dim");
  layer.offsets = field<std::vector<std::size_t>>(doc, "offsets");
  const auto blocks = field<std::vector<std::string>>(doc, "blocks");
  const json projections = doc.contains("projections") ? doc["projections"] : json::array();
  if (projections.size() != blocks.size()) throw StructuralError("layer header lists mismatched projections");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    layer.blocks.push_back(matrix_from_csv(read_text(stem.parent_path() / blocks[i])));
    if (projections[i].is_null())
      layer.projections.emplace_back(std::nullopt);
    else
      layer.projections.emplace_back(
          matrix_from_csv(read_text(stem.parent_path() / projections[i].get<std::string>())));
  }
  layer.validate();
  return layer;
}

}  // namespace mdembed
