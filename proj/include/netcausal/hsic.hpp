#pragma once

#include <algorithm>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

inline Mat rbf_kernel(const Mat& x, double sigma) {
  const int n = static_cast<int>(x.rows());
  Mat k(n, n);
  const double inv = -1.0 / (2.0 * sigma * sigma);
  for (int i = 0; i < n; ++i) {
    k(i, i) = 1.0;
    for (int j = i + 1; j < n; ++j) {
      const double d2 = (x.row(i) - x.row(j)).squaredNorm();
      k(i, j) = k(j, i) = std::exp(inv * d2);
    }
  }
  return k;
}

// Median of strict pairwise Euclidean distances; falls back to 1 when the
// rows are (numerically) all identical.
inline double median_pairwise_distance(const Mat& x) {
  const int n = static_cast<int>(x.rows());
  if (n < 2) throw invalid_input("median heuristic needs at least 2 rows");
  std::vector<double> d;
  d.reserve(static_cast<size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      d.push_back((x.row(i) - x.row(j)).norm());
  auto mid = d.begin() + d.size() / 2;
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) {
    auto lo = std::max_element(d.begin(), mid);
    med = 0.5 * (med + *lo);
  }
  return med < 1e-12 ? 1.0 : med;
}

// Three-term V-statistic with the same Gaussian RBF on both arguments:
//   (1/n^2) sum_ij K_ij L_ij + (1/n^4) sum_ij K_ij sum_kl L_kl
//   - (2/n^3) sum_i (sum_j K_ij)(sum_k L_ik).
// sigma <= 0 selects the median heuristic on r.
inline double hsic(const Mat& r, const Mat& t, double sigma = 0.0) {
  const int n = static_cast<int>(r.rows());
  if (n < 2) throw invalid_input("hsic needs at least 2 rows");
  if (t.rows() != n) throw invalid_input("hsic: r and t row counts disagree");
  if (sigma <= 0.0) sigma = median_pairwise_distance(r);
  const Mat k = rbf_kernel(r, sigma);
  const Mat l = rbf_kernel(t, sigma);
  const double n2 = static_cast<double>(n) * n;
  const double term1 = k.cwiseProduct(l).sum() / n2;
  const double term2 = k.sum() * l.sum() / (n2 * n2);
  const double term3 = 2.0 * k.rowwise().sum().dot(l.rowwise().sum()) / (n2 * n);
  return term1 + term2 - term3;
}

inline double hsic(const Mat& r, const std::vector<double>& t, double sigma = 0.0) {
  Mat tm(static_cast<Eigen::Index>(t.size()), 1);
  for (size_t i = 0; i < t.size(); ++i) tm(static_cast<Eigen::Index>(i), 0) = t[i];
  return hsic(r, tm, sigma);
}

// Tape composite of the same statistic, differentiable w.r.t. r. sigma is
// taken as a constant (resolve the median heuristic before calling).
inline Var hsic_penalty(Tape& tape, const Var& r, const Mat& t, double sigma) {
  const int n = static_cast<int>(r->value.rows());
  if (n < 2) throw invalid_input("hsic needs at least 2 rows");
  if (sigma <= 0.0) throw invalid_input("hsic_penalty: sigma must be resolved");
  Var sq = tape.rowsum(tape.mul(r, r));
  Var cross = tape.matmul(r, tape.transpose(r));
  Var d = tape.add_colvec(
      tape.add_rowvec(tape.scale(cross, -2.0), tape.transpose(sq)), sq);
  Var k = tape.exp_op(tape.scale(d, -1.0 / (2.0 * sigma * sigma)));

  const Mat l = rbf_kernel(t, sigma);
  const double n2 = static_cast<double>(n) * n;
  Var lconst = make_var(l, false);
  Var term1 = tape.scale(tape.sum(tape.mul(k, lconst)), 1.0 / n2);
  Var term2 = tape.scale(tape.sum(k), l.sum() / (n2 * n2));
  Var lrows = make_var(l.rowwise().sum(), false);
  Var term3 =
      tape.scale(tape.sum(tape.mul(tape.rowsum(k), lrows)), 2.0 / (n2 * n));
  return tape.sub(tape.add(term1, term2), term3);
}

}  // namespace netcausal
