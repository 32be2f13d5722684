#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"

namespace netcausal {

enum class Metric { cosine, euclidean };

// k nearest rows per node, union-symmetrized; ties go to the lower index.
inline Graph build_knn_graph(const Mat& x, int k, Metric metric = Metric::cosine) {
  const int n = static_cast<int>(x.rows());
  if (n < 2) throw invalid_input("knn graph needs at least 2 rows");
  if (k < 1 || k >= n)
    throw invalid_input("knn: k must satisfy 1 <= k < n, got k=" +
                        std::to_string(k));
  check_finite(x, "knn covariates");

  Vec norms(n);
  if (metric == Metric::cosine) {
    for (int i = 0; i < n; ++i) {
      norms[i] = x.row(i).norm();
      if (norms[i] < 1e-300)
        throw invalid_input("knn: all-zero row " + std::to_string(i) +
                            " under cosine metric");
    }
  }

  std::vector<std::pair<int, int>> edges;
  edges.reserve(static_cast<size_t>(n) * k);
  std::vector<std::pair<double, int>> cand(n - 1);
  for (int i = 0; i < n; ++i) {
    int m = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double dist;
      if (metric == Metric::cosine) {
        dist = 1.0 - x.row(i).dot(x.row(j)) / (norms[i] * norms[j]);
      } else {
        dist = (x.row(i) - x.row(j)).squaredNorm();
      }
      cand[m++] = {dist, j};
    }
    std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
    for (int t = 0; t < k; ++t) edges.emplace_back(i, cand[t].second);
  }
  return Graph::from_edges(n, edges);
}

}  // namespace netcausal
