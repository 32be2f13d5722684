#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcausal/synthgen.hpp"
#include "netcausal/toml.hpp"

namespace netcausal {

namespace csv {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline double parse_cell(const std::string& cell, int row, int col,
                         const std::string& path) {
  try {
    size_t pos = 0;
    double v = std::stod(cell, &pos);
    while (pos < cell.size() && std::isspace(static_cast<unsigned char>(cell[pos]))) ++pos;
    if (pos != cell.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw parse_error(path + ": non-numeric cell at row " + std::to_string(row) +
                      ", column " + std::to_string(col));
  }
}

}  // namespace csv

// Header row of names, numeric body, columns standardized on load.
inline std::pair<Mat, std::vector<std::string>> load_covariates_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open covariates: " + path);
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names = csv::split_line(line);
  if (names.empty()) throw parse_error(path + ": empty header");
  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = csv::split_line(line);
    if (cells.size() != names.size())
      throw parse_error(path + ": row " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(names.size()));
    std::vector<double> row(cells.size());
    for (size_t c = 0; c < cells.size(); ++c)
      row[c] = csv::parse_cell(cells[c], lineno, static_cast<int>(c) + 1, path);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2)
    throw parse_error(path + ": need at least 2 data rows, got " +
                      std::to_string(rows.size()));
  Mat x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < names.size(); ++j)
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  standardize_columns(x);
  return {std::move(x), std::move(names)};
}

inline std::string response_name(ResponseModel m) {
  switch (m) {
    case ResponseModel::G0: return "G0";
    case ResponseModel::G1: return "G1";
    default: return "G2";
  }
}

inline ResponseModel response_from_name(const std::string& s) {
  if (s == "G0") return ResponseModel::G0;
  if (s == "G1") return ResponseModel::G1;
  if (s == "G2") return ResponseModel::G2;
  throw invalid_input("unknown response model: " + s);
}

inline const std::set<std::string>& gen_config_keys() {
  static const std::set<std::string> keys{
      "graph.k",           "graph.metric",       "graph.edge_file",
      "generate.schema",   "generate.n",         "generate.p",
      "generate.mode",     "generate.alpha",     "generate.spillover_order",
      "generate.response", "generate.kappa_nl",  "generate.noise_sd",
      "generate.seed"};
  return keys;
}

inline GenConfig gen_config_from_table(const toml::Table& t) {
  GenConfig cfg;
  auto get = [&](const std::string& key) -> const toml::Value* {
    auto it = t.find(key);
    return it == t.end() ? nullptr : &it->second;
  };
  if (auto* v = get("graph.k")) cfg.k = static_cast<int>(v->as_int());
  if (auto* v = get("graph.metric")) {
    if (v->as_str() == "cosine") cfg.metric = Metric::cosine;
    else if (v->as_str() == "euclidean") cfg.metric = Metric::euclidean;
    else throw invalid_input("unknown metric: " + v->as_str());
  }
  if (auto* v = get("graph.edge_file")) cfg.edge_file = v->as_str();
  if (auto* v = get("generate.schema")) cfg.schema = schema_from_name(v->as_str());
  if (auto* v = get("generate.n")) cfg.n = static_cast<int>(v->as_int());
  if (auto* v = get("generate.p")) cfg.p = v->as_double();
  if (auto* v = get("generate.mode")) {
    if (v->as_str() == "randomized") cfg.mode = AssignMode::randomized;
    else if (v->as_str() == "observational") cfg.mode = AssignMode::observational;
    else throw invalid_input("unknown assignment mode: " + v->as_str());
  }
  if (auto* v = get("generate.alpha")) cfg.alpha = v->as_double();
  if (auto* v = get("generate.spillover_order"))
    cfg.spillover_order = static_cast<int>(v->as_int());
  if (auto* v = get("generate.response")) cfg.response = response_from_name(v->as_str());
  if (auto* v = get("generate.kappa_nl")) cfg.kappa_nl = v->as_double();
  if (auto* v = get("generate.noise_sd")) cfg.noise_sd = v->as_double();
  if (auto* v = get("generate.seed"))
    cfg.seed = static_cast<std::uint64_t>(v->as_int());
  return cfg;
}

inline std::string gen_config_toml(const GenConfig& cfg) {
  std::ostringstream out;
  out << "[graph]\n";
  out << "k = " << cfg.k << "\n";
  out << "metric = \"" << (cfg.metric == Metric::cosine ? "cosine" : "euclidean")
      << "\"\n";
  if (!cfg.edge_file.empty()) out << "edge_file = \"" << cfg.edge_file << "\"\n";
  out << "\n[generate]\n";
  out << "schema = \"" << schema_name(cfg.schema) << "\"\n";
  out << "n = " << cfg.n << "\n";
  out << "p = " << toml::format_double(cfg.p) << "\n";
  out << "mode = \""
      << (cfg.mode == AssignMode::randomized ? "randomized" : "observational")
      << "\"\n";
  out << "alpha = " << toml::format_double(cfg.alpha) << "\n";
  out << "spillover_order = " << cfg.spillover_order << "\n";
  out << "response = \"" << response_name(cfg.response) << "\"\n";
  out << "kappa_nl = " << toml::format_double(cfg.kappa_nl) << "\n";
  out << "noise_sd = " << toml::format_double(cfg.noise_sd) << "\n";
  out << "seed = " << cfg.seed << "\n";
  return out.str();
}

inline std::string gen_config_hash(const GenConfig& cfg) {
  return fnv1a64_hex(gen_config_toml(cfg));
}

inline void save_dataset(const std::string& dir, const GeneratedData& gen,
                         const GenConfig& cfg) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const Dataset& d = gen.data;
  const auto& feats = schema_features(cfg.schema);

  {
    std::ofstream out(fs::path(dir) / "covariates.csv");
    for (size_t j = 0; j < feats.size(); ++j)
      out << feats[j].name << (j + 1 < feats.size() ? "," : "\n");
    for (int i = 0; i < d.n(); ++i)
      for (int j = 0; j < d.x.cols(); ++j)
        out << toml::format_double(d.x(i, j)) << (j + 1 < d.x.cols() ? "," : "\n");
  }
  {
    std::ofstream out(fs::path(dir) / "edges.txt");
    for (int i = 0; i < gen.graph.size(); ++i)
      for (int j : gen.graph.neighbors(i))
        if (i < j) out << i << " " << j << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "assign.csv");
    out << "T,G,Y,split\n";
    static const char* names[] = {"train", "val", "test"};
    for (int i = 0; i < d.n(); ++i)
      out << (d.t[i] > 0.5 ? 1 : 0) << "," << toml::format_double(d.g_exposure[i])
          << "," << toml::format_double(d.y[i]) << "," << names[d.split[i]] << "\n";
  }
  if (d.has_truth) {
    std::ofstream out(fs::path(dir) / "truth.csv");
    out << "Y0,tau,delta\n";
    for (int i = 0; i < d.n(); ++i)
      out << toml::format_double(d.y0[i]) << "," << toml::format_double(d.tau[i])
          << "," << toml::format_double(d.delta[i]) << "\n";
  }
  {
    std::ofstream out(fs::path(dir) / "config.toml");
    out << gen_config_toml(cfg);
  }
  {
    nlohmann::json manifest{{"format", "netcausal-dataset"},
                            {"version", 1},
                            {"n", d.n()},
                            {"schema", schema_name(cfg.schema)},
                            {"seed", cfg.seed},
                            {"config_hash", gen_config_hash(cfg)}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    out << manifest.dump(2) << "\n";
  }
}

struct LoadedDataset {
  Dataset data;
  Graph graph;
  GenConfig cfg;
};

inline LoadedDataset load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedDataset out;
  auto table = toml::parse_file((fs::path(dir) / "config.toml").string());
  out.cfg = gen_config_from_table(table);

  auto [x, names] = load_covariates_csv((fs::path(dir) / "covariates.csv").string());
  out.data.x = std::move(x);
  const int n = out.data.n();
  out.graph = load_edge_list((fs::path(dir) / "edges.txt").string(), n);

  const std::string apath = (fs::path(dir) / "assign.csv").string();
  std::ifstream in(apath);
  if (!in) throw parse_error("cannot open " + apath);
  std::string line;
  std::getline(in, line);
  out.data.t.reserve(n);
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = csv::split_line(line);
    if (cells.size() != 4)
      throw parse_error(apath + ": row " + std::to_string(lineno) +
                        " must have 4 cells");
    out.data.t.push_back(csv::parse_cell(cells[0], lineno, 1, apath));
    out.data.g_exposure.push_back(csv::parse_cell(cells[1], lineno, 2, apath));
    out.data.y.push_back(csv::parse_cell(cells[2], lineno, 3, apath));
    if (cells[3] == "train") out.data.split.push_back(0);
    else if (cells[3] == "val") out.data.split.push_back(1);
    else if (cells[3] == "test") out.data.split.push_back(2);
    else
      throw parse_error(apath + ": row " + std::to_string(lineno) +
                        ": unknown split '" + cells[3] + "'");
  }
  if (static_cast<int>(out.data.t.size()) != n)
    throw parse_error(apath + ": expected " + std::to_string(n) + " rows");

  const std::string tpath = (fs::path(dir) / "truth.csv").string();
  if (fs::exists(tpath)) {
    std::ifstream tin(tpath);
    std::getline(tin, line);
    lineno = 1;
    while (std::getline(tin, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cells = csv::split_line(line);
      if (cells.size() != 3)
        throw parse_error(tpath + ": row " + std::to_string(lineno) +
                          " must have 3 cells");
      out.data.y0.push_back(csv::parse_cell(cells[0], lineno, 1, tpath));
      out.data.tau.push_back(csv::parse_cell(cells[1], lineno, 2, tpath));
      out.data.delta.push_back(csv::parse_cell(cells[2], lineno, 3, tpath));
    }
    if (static_cast<int>(out.data.y0.size()) != n)
      throw parse_error(tpath + ": expected " + std::to_string(n) + " rows");
    out.data.has_truth = true;
  }
  out.data.mode = out.cfg.mode;
  out.data.p = out.cfg.p;
  return out;
}

}  // namespace netcausal
