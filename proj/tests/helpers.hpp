#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"

namespace testutil {

inline netcausal::Graph random_er_graph(int n, double p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (u(rng) < p) edges.emplace_back(i, j);
  return netcausal::Graph::from_edges(n, edges);
}

inline netcausal::Mat dense_of(const netcausal::SparseRows& s) {
  netcausal::Mat d = netcausal::Mat::Zero(s.nrows, s.ncols);
  for (int i = 0; i < s.nrows; ++i)
    for (auto [j, v] : s.rows[i]) d(i, j) += v;
  return d;
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto cand = base / ("netcausal_test_" + std::to_string(std::random_device{}()));
      std::error_code ec;
      if (std::filesystem::create_directory(cand, ec)) {
        path_ = cand;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p);
  out << content;
  out.close();
  return p.string();
}

}  // namespace testutil
