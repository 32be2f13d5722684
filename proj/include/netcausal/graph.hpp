#pragma once

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "netcausal/common.hpp"

namespace netcausal {

// Undirected simple graph: sorted adjacency lists, no self-loops, no duplicates.
class Graph {
 public:
  Graph() = default;
  explicit Graph(int n) : adj_(static_cast<size_t>(n)) {
    if (n < 0) throw invalid_input("graph size must be nonnegative");
  }

  static Graph from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    Graph g(n);
    int self_loops = 0;
    for (auto [i, j] : edges) {
      g.check_node(i);
      g.check_node(j);
      if (i == j) {
        ++self_loops;
        continue;
      }
      g.adj_[i].push_back(j);
      g.adj_[j].push_back(i);
    }
    g.finalize();
    if (self_loops > 0)
      log_warn("dropped " + std::to_string(self_loops) + " self-loop(s)");
    return g;
  }

  int size() const { return static_cast<int>(adj_.size()); }

  const std::vector<int>& neighbors(int i) const {
    check_node(i);
    return adj_[i];
  }

  int degree(int i) const { return static_cast<int>(neighbors(i).size()); }

  int max_degree() const {
    int d = 0;
    for (const auto& nb : adj_) d = std::max(d, static_cast<int>(nb.size()));
    return d;
  }

  // Nodes exactly two hops away: neighbors-of-neighbors minus {i} and N(i).
  std::vector<int> two_hop(int i) const {
    check_node(i);
    std::vector<int> out;
    for (int j : adj_[i])
      for (int k : adj_[j]) {
        if (k == i) continue;
        if (std::binary_search(adj_[i].begin(), adj_[i].end(), k)) continue;
        out.push_back(k);
      }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  void check_node(int i) const {
    if (i < 0 || i >= size())
      throw invalid_input("node index " + std::to_string(i) +
                          " out of range [0, " + std::to_string(size()) + ")");
  }

  void finalize() {
    for (auto& nb : adj_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
  }

  std::vector<std::vector<int>> adj_;
};

// Row-sparse linear operator over node features.
struct SparseRows {
  int nrows = 0;
  int ncols = 0;
  std::vector<std::vector<std::pair<int, double>>> rows;

  Mat apply(const Mat& h) const {
    if (h.rows() != ncols)
      throw invalid_input("sparse apply: operand has " +
                          std::to_string(h.rows()) + " rows, expected " +
                          std::to_string(ncols));
    Mat out = Mat::Zero(nrows, h.cols());
    for (int i = 0; i < nrows; ++i)
      for (auto [j, v] : rows[i]) out.row(i) += v * h.row(j);
    return out;
  }

  // Adjoint of apply, for reverse-mode gradients.
  Mat apply_transpose(const Mat& h) const {
    if (h.rows() != nrows)
      throw invalid_input("sparse apply_transpose: bad operand rows");
    Mat out = Mat::Zero(ncols, h.cols());
    for (int i = 0; i < nrows; ++i)
      for (auto [j, v] : rows[i]) out.row(j) += v * h.row(i);
    return out;
  }
};

// D^{-1/2} (A + I) D^{-1/2} with D = diag(1 + deg). Entries in (0, 1].
using NormAdjacency = SparseRows;

inline NormAdjacency normalized_adjacency(const Graph& g) {
  const int n = g.size();
  NormAdjacency s{n, n, std::vector<std::vector<std::pair<int, double>>>(n)};
  for (int i = 0; i < n; ++i) {
    const double di = 1.0 + g.degree(i);
    auto& row = s.rows[i];
    row.reserve(g.degree(i) + 1);
    bool self_placed = false;
    for (int j : g.neighbors(i)) {
      if (!self_placed && j > i) {
        row.emplace_back(i, 1.0 / di);
        self_placed = true;
      }
      row.emplace_back(j, 1.0 / std::sqrt(di * (1.0 + g.degree(j))));
    }
    if (!self_placed) row.emplace_back(i, 1.0 / di);
  }
  return s;
}

// Row i averages over N(i); empty row for isolated nodes.
inline SparseRows neighbor_mean(const Graph& g) {
  const int n = g.size();
  SparseRows s{n, n, std::vector<std::vector<std::pair<int, double>>>(n)};
  for (int i = 0; i < n; ++i) {
    const int d = g.degree(i);
    if (d == 0) continue;
    s.rows[i].reserve(d);
    for (int j : g.neighbors(i)) s.rows[i].emplace_back(j, 1.0 / d);
  }
  return s;
}

// Row i averages over N(i) ∪ {i}.
inline SparseRows neighbor_mean_with_self(const Graph& g) {
  const int n = g.size();
  SparseRows s{n, n, std::vector<std::vector<std::pair<int, double>>>(n)};
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / (1.0 + g.degree(i));
    s.rows[i].reserve(g.degree(i) + 1);
    bool self_placed = false;
    for (int j : g.neighbors(i)) {
      if (!self_placed && j > i) {
        s.rows[i].emplace_back(i, w);
        self_placed = true;
      }
      s.rows[i].emplace_back(j, w);
    }
    if (!self_placed) s.rows[i].emplace_back(i, w);
  }
  return s;
}

inline Graph load_edge_list(const std::string& path, int n) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open edge list: " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    long long i = -1, j = -1;
    std::string extra;
    if (!(ls >> i >> j) || (ls >> extra))
      throw parse_error(path + ":" + std::to_string(lineno) +
                        ": malformed edge line: '" + line + "'");
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw parse_error(path + ":" + std::to_string(lineno) +
                        ": node index out of range [0, " + std::to_string(n) +
                        ")");
    edges.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }
  return Graph::from_edges(n, edges);
}

inline Graph make_path_graph(int n) {
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i + 1 < n; ++i) e.emplace_back(i, i + 1);
  return Graph::from_edges(n, e);
}

inline Graph make_ring_graph(int n) {
  if (n < 3) throw invalid_input("ring graph needs at least 3 nodes");
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i) e.emplace_back(i, (i + 1) % n);
  return Graph::from_edges(n, e);
}

inline Graph make_star_graph(int n) {
  if (n < 2) throw invalid_input("star graph needs at least 2 nodes");
  std::vector<std::pair<int, int>> e;
  for (int i = 1; i < n; ++i) e.emplace_back(0, i);
  return Graph::from_edges(n, e);
}

inline Graph make_er_graph(int n, double p, std::mt19937_64& rng) {
  if (p < 0.0 || p > 1.0) throw invalid_input("edge probability must lie in [0, 1]");
  std::bernoulli_distribution coin(p);
  std::vector<std::pair<int, int>> e;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (coin(rng)) e.emplace_back(i, j);
  return Graph::from_edges(n, e);
}

// Pairing-model sampler with swap repair. Each round pairs shuffled stubs,
// then rewires self-loops and duplicate edges by swapping endpoints with a
// random other pair; a round that stops making progress is reshuffled.
inline Graph make_regular_graph(int n, int d, std::mt19937_64& rng) {
  if (n < 2 || d < 1 || d >= n) throw invalid_input("regular graph needs 1 <= d < n");
  if (n % 2 != 0 && d % 2 != 0)
    throw invalid_input("regular graph needs n*d even");
  std::vector<int> stubs;
  stubs.reserve(static_cast<size_t>(n) * d);
  for (int round = 0; round < 200; ++round) {
    stubs.clear();
    for (int v = 0; v < n; ++v)
      for (int k = 0; k < d; ++k) stubs.push_back(v);
    std::shuffle(stubs.begin(), stubs.end(), rng);
    const int m = static_cast<int>(stubs.size()) / 2;
    std::vector<std::pair<int, int>> pairs(m);
    for (int k = 0; k < m; ++k) pairs[k] = {stubs[2 * k], stubs[2 * k + 1]};

    auto key = [n](int a, int b) {
      return static_cast<long long>(std::min(a, b)) * n + std::max(a, b);
    };
    std::uniform_int_distribution<int> pick(0, m - 1);
    for (int pass = 0; pass < 200; ++pass) {
      std::set<long long> seen;
      int bad = -1;
      for (int k = 0; k < m; ++k) {
        auto [a, b] = pairs[k];
        if (a == b || !seen.insert(key(a, b)).second) {
          bad = k;
          break;
        }
      }
      if (bad < 0) return Graph::from_edges(n, pairs);
      const int other = pick(rng);
      if (other != bad) std::swap(pairs[bad].second, pairs[other].second);
    }
  }
  throw numeric_error("regular graph sampling failed to produce a simple graph");
}

}  // namespace netcausal
