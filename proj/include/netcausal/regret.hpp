#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/synthgen.hpp"
#include "netcausal/toml.hpp"

namespace netcausal {

// Dependence hypergraph of a network: hyperedge i collects node i, its
// neighbors, and all neighbors-of-neighbors. omega is the largest number of
// hyperedges any single vertex belongs to; it never exceeds d_max^2 + 1
// (each membership of v corresponds to a node within two hops of v, and in
// the worst triangle-free case that is d_max*(d_max-1) two-hop nodes plus
// d_max neighbors plus v itself).
struct Hypergraph {
  std::vector<std::vector<int>> edges;  // sorted vertex lists
  std::vector<int> membership;          // membership[v] = #hyperedges holding v
  int omega = 0;
  int max_edge_size = 0;
};

inline Hypergraph build_hypergraph(const Graph& g) {
  const int n = g.size();
  Hypergraph h;
  h.edges.resize(static_cast<std::size_t>(n));
  h.membership.assign(static_cast<std::size_t>(n), 0);
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> touched;
  for (int i = 0; i < n; ++i) {
    touched.clear();
    auto put = [&](int v) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        touched.push_back(v);
      }
    };
    put(i);
    for (int j : g.neighbors(i)) {
      put(j);
      for (int k : g.neighbors(j)) put(k);
    }
    std::sort(touched.begin(), touched.end());
    h.edges[static_cast<std::size_t>(i)] = touched;
    for (int v : touched) {
      ++h.membership[static_cast<std::size_t>(v)];
      seen[static_cast<std::size_t>(v)] = 0;
    }
    h.max_edge_size = std::max(h.max_edge_size, static_cast<int>(touched.size()));
  }
  for (int v = 0; v < n; ++v) h.omega = std::max(h.omega, h.membership[static_cast<std::size_t>(v)]);
  return h;
}

// A family of networked random variables: each xi_i depends only on the
// covariates of hyperedge i, shares the mean mu, and stays inside [a, b].
struct NetworkedFamily {
  double a = 0.0;
  double b = 1.0;
  double mu = 0.5;
  std::function<std::vector<double>(const Graph&, const Hypergraph&,
                                    std::mt19937_64&)>
      sample;
};

// Default family: xi_i is the mean of i.i.d. uniform draws over hyperedge i,
// clipped to [0, 1]. The clip is a no-op for uniforms but keeps the family
// bounded under substitution of the per-node law.
inline NetworkedFamily uniform_mean_family() {
  NetworkedFamily fam;
  fam.sample = [](const Graph& g, const Hypergraph& h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> node(static_cast<std::size_t>(g.size()));
    for (auto& v : node) v = u(rng);
    std::vector<double> xi(static_cast<std::size_t>(g.size()));
    for (std::size_t i = 0; i < xi.size(); ++i) {
      double s = 0.0;
      for (int v : h.edges[i]) s += node[static_cast<std::size_t>(v)];
      xi[i] = std::clamp(s / static_cast<double>(h.edges[i].size()), 0.0, 1.0);
    }
    return xi;
  };
  return fam;
}

// Independent Bernoulli(p) per node; networked only through the trivial
// singleton hyperedges of an edgeless graph.
inline NetworkedFamily bernoulli_family(double p = 0.5) {
  if (p <= 0.0 || p >= 1.0)
    throw invalid_input("bernoulli_family: p must lie in (0, 1)");
  NetworkedFamily fam;
  fam.mu = p;
  fam.sample = [p](const Graph& g, const Hypergraph&, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(p);
    std::vector<double> xi(static_cast<std::size_t>(g.size()));
    for (auto& v : xi) v = coin(rng) ? 1.0 : 0.0;
    return xi;
  };
  return fam;
}

struct ConcentrationRow {
  double eps = 0.0;
  double empirical = 0.0;  // frequency of |sample mean - mu| >= eps
  double bound = 0.0;      // exp(-n eps^2 / (2 omega (b-a)^2))
  bool violation = false;  // empirical above bound beyond 3 binomial SEs
};

// Monte-Carlo check of the hypergraph concentration inequality. Trial t draws
// its randomness from stream t of the root seed, so results do not depend on
// evaluation order.
inline std::vector<ConcentrationRow> concentration_check(
    const Graph& g, const NetworkedFamily& fam, int n_trials,
    const std::vector<double>& eps_grid, std::uint64_t seed) {
  if (n_trials < 1) throw invalid_input("concentration_check: n_trials must be >= 1");
  if (eps_grid.empty()) throw invalid_input("concentration_check: empty eps grid");
  if (!(fam.a < fam.b) || !std::isfinite(fam.a) || !std::isfinite(fam.b))
    throw invalid_input("concentration_check: family must have finite bounds a < b");
  if (!fam.sample) throw invalid_input("concentration_check: family has no sampler");
  const Hypergraph h = build_hypergraph(g);
  const int n = g.size();
  std::vector<int> exceed(eps_grid.size(), 0);
  for (int t = 0; t < n_trials; ++t) {
    auto rng = make_rng(seed, static_cast<std::uint64_t>(t));
    const auto xi = fam.sample(g, h, rng);
    if (static_cast<int>(xi.size()) != n)
      throw invalid_input("concentration_check: family returned wrong length");
    double mean = 0.0;
    for (double v : xi) {
      if (v < fam.a - 1e-12 || v > fam.b + 1e-12)
        throw invalid_input("concentration_check: family left its stated bounds");
      mean += v;
    }
    mean /= static_cast<double>(n);
    const double dev = std::abs(mean - fam.mu);
    for (std::size_t k = 0; k < eps_grid.size(); ++k)
      if (dev >= eps_grid[k]) ++exceed[k];
  }
  const double range = fam.b - fam.a;
  std::vector<ConcentrationRow> rows;
  for (std::size_t k = 0; k < eps_grid.size(); ++k) {
    ConcentrationRow row;
    row.eps = eps_grid[k];
    row.empirical = static_cast<double>(exceed[k]) / static_cast<double>(n_trials);
    row.bound = std::exp(-static_cast<double>(n) * row.eps * row.eps /
                         (2.0 * h.omega * range * range));
    const double var = std::max(row.bound * (1.0 - row.bound),
                                row.empirical * (1.0 - row.empirical));
    const double se = std::sqrt(var / static_cast<double>(n_trials));
    row.violation = row.empirical > row.bound + 3.0 * se;
    rows.push_back(row);
  }
  return rows;
}

inline std::string concentration_csv(const std::vector<ConcentrationRow>& rows) {
  std::ostringstream out;
  out << "eps,empirical,bound,violation\n";
  for (const auto& r : rows)
    out << toml::format_double(r.eps) << "," << toml::format_double(r.empirical)
        << "," << toml::format_double(r.bound) << "," << (r.violation ? 1 : 0)
        << "\n";
  return out.str();
}

// Constants feeding the closed-form regret bounds: effect/spillover envelopes
// M1 and M2, policy Lipschitz constant L, estimator convergence rates
// alpha/n^zeta, policy class capacity, and confidence level.
struct BoundInputs {
  std::int64_t n = 0;
  int d_max = 0;
  double m1 = 0.0;
  double m2 = 0.0;
  double lips = 0.0;
  double pi_class_size = 0.0;
  double delta_conf = 0.05;
  double alpha_tau = 0.0;
  double alpha_delta = 0.0;
  double zeta_tau = 0.5;
  double zeta_delta = 0.5;
  double p_t = -1.0;  // negative = unconstrained mode only

  bool has_p_t() const { return p_t >= 0.0; }

  void validate() const {
    if (n < 1) throw invalid_input("bound inputs: n must be >= 1");
    if (d_max < 0) throw invalid_input("bound inputs: d_max must be >= 0");
    if (m1 <= 0.0 || m2 <= 0.0 || lips <= 0.0)
      throw invalid_input("bound inputs: M1, M2, L must be positive");
    if (pi_class_size < 1.0)
      throw invalid_input("bound inputs: policy class size must be >= 1");
    if (delta_conf <= 0.0 || delta_conf >= 1.0)
      throw invalid_input("bound inputs: confidence delta must lie in (0, 1)");
    if (alpha_tau < 0.0 || alpha_delta < 0.0)
      throw invalid_input("bound inputs: rate constants must be >= 0");
    if (zeta_tau <= 0.0 || zeta_tau >= 1.0 || zeta_delta <= 0.0 || zeta_delta >= 1.0)
      throw invalid_input("bound inputs: rate exponents must lie in (0, 1)");
    if (has_p_t() && (p_t <= 0.0 || p_t >= 1.0))
      throw invalid_input("bound inputs: p_t must lie in (0, 1) when present");
  }
};

// Estimator-convergence part of the regret bound.
inline double regret_rate_term(const BoundInputs& b) {
  return 2.0 * (b.alpha_tau / std::pow(static_cast<double>(b.n), b.zeta_tau) +
                b.alpha_delta / std::pow(static_cast<double>(b.n), b.zeta_delta));
}

// The regret and failure-probability curves as functions of eps, plus the
// covering radius the probability's covering number would be evaluated at.
// The finite-class mode replaces the covering number by the class size, so
// the radius is informational there.
struct RegretCurves {
  std::function<double(double)> regret;     // rate term + 2 eps
  std::function<double(double)> fail_prob;  // |Pi| exp(-n eps^2 / (32 (d^2+1) (M1+M2)^2))
  std::function<double(double)> radius;     // covering radius at eps
};

inline RegretCurves regret_curves(const BoundInputs& b, bool constrained) {
  b.validate();
  if (constrained && !b.has_p_t())
    throw invalid_input("regret curves: constrained mode needs p_t");
  const double rate = regret_rate_term(b);
  const double msum = b.m1 + b.m2;
  const double dd = static_cast<double>(b.d_max) * b.d_max + 1.0;
  const double n = static_cast<double>(b.n);
  const double cls = b.pi_class_size;
  const double denom = constrained
                           ? 8.0 * ((b.m1 + b.m2 + b.lips) + msum / b.p_t)
                           : 4.0 * (2.0 * b.m1 + 2.0 * b.m2 + b.lips);
  RegretCurves c;
  c.regret = [rate](double eps) { return rate + 2.0 * eps; };
  c.fail_prob = [cls, n, dd, msum](double eps) {
    return std::min(1.0, cls * std::exp(-n * eps * eps /
                                        (32.0 * dd * msum * msum)));
  };
  c.radius = [denom](double eps) { return eps / denom; };
  return c;
}

// Closed-form finite-class bound at confidence 1 - delta.
struct RegretBound {
  double rate_term = 0.0;     // 2 (a_tau / n^z_tau + a_delta / n^z_delta)
  double eps_star = 0.0;      // eps making the failure probability equal delta
  double display_term = 0.0;  // 8 (M1+M2) sqrt(2 (d^2+1)/n ln(|Pi|/delta)) = 2 eps*
  double total = 0.0;         // rate_term + 2 eps*
};

inline RegretBound regret_bound(const BoundInputs& b) {
  b.validate();
  RegretBound out;
  out.rate_term = regret_rate_term(b);
  const double dd = static_cast<double>(b.d_max) * b.d_max + 1.0;
  const double n = static_cast<double>(b.n);
  const double lg = std::log(b.pi_class_size / b.delta_conf);
  if (lg < 0.0)
    throw invalid_input("regret_bound: class size below confidence level");
  out.eps_star = (b.m1 + b.m2) * std::sqrt(32.0 * dd / n * lg);
  out.display_term = 8.0 * (b.m1 + b.m2) * std::sqrt(2.0 * dd / n * lg);
  out.total = out.rate_term + 2.0 * out.eps_star;
  return out;
}

inline nlohmann::json bound_report_json(const BoundInputs& b) {
  const RegretBound r = regret_bound(b);
  return nlohmann::json{{"n", b.n},
                        {"d_max", b.d_max},
                        {"m1", b.m1},
                        {"m2", b.m2},
                        {"lips", b.lips},
                        {"pi_class_size", b.pi_class_size},
                        {"delta_conf", b.delta_conf},
                        {"rate_term", r.rate_term},
                        {"eps_star", r.eps_star},
                        {"display_term", r.display_term},
                        {"total", r.total}};
}

// Leading-term error curve for estimator convergence under interference:
// sqrt(D^3 ln D / n) with D = 1 + d + d^2. The hidden constants are
// non-constructive, so only the scaling is reported.
struct Claim1Row {
  int d_max = 0;
  int n = 0;
  double value = 0.0;
};

inline std::vector<Claim1Row> claim1_curve(const std::vector<int>& d_grid,
                                           const std::vector<int>& n_grid) {
  if (d_grid.empty() || n_grid.empty())
    throw invalid_input("claim1_curve: empty grid");
  std::vector<Claim1Row> rows;
  for (int d : d_grid) {
    if (d < 1) throw invalid_input("claim1_curve: d_max must be >= 1");
    const double bigd = 1.0 + d + static_cast<double>(d) * d;
    for (int n : n_grid) {
      if (n < 1) throw invalid_input("claim1_curve: n must be >= 1");
      rows.push_back({d, n,
                      std::sqrt(bigd * bigd * bigd * std::log(bigd) /
                                static_cast<double>(n))});
    }
  }
  return rows;
}

struct LipschitzResult {
  double max_ratio = 0.0;  // sup over pairs/nodes of |delta1 - delta2| / ||pi1 - pi2||_inf
  double bound = 0.0;      // alpha * max|tau|
  int pairs_used = 0;      // pairs with distinct policies
  bool ok = false;
};

// Worst-node ratio |delta(p1) - delta(p2)| / ||p1 - p2||_inf for one explicit
// policy pair under the first-order spillover response; empty when the
// policies coincide and the ratio is undefined.
inline std::optional<double> lipschitz_ratio(const Graph& g,
                                             const std::vector<double>& tau,
                                             double alpha,
                                             const std::vector<double>& p1,
                                             const std::vector<double>& p2) {
  const auto n = static_cast<std::size_t>(g.size());
  if (tau.size() != n || p1.size() != n || p2.size() != n)
    throw invalid_input("lipschitz_ratio: length mismatch");
  double gap = 0.0;
  for (std::size_t i = 0; i < n; ++i) gap = std::max(gap, std::abs(p1[i] - p2[i]));
  if (gap == 0.0) return std::nullopt;
  const auto d1 = gen_spillover(g, p1, tau, alpha, 1);
  const auto d2 = gen_spillover(g, p2, tau, alpha, 1);
  double ratio = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    ratio = std::max(ratio, std::abs(d1[i] - d2[i]) / gap);
  return ratio;
}

// Samples random policy pairs and verifies the first-order spillover response
// is Lipschitz in the policy with constant alpha * max|tau|. Identical pairs
// leave the ratio undefined and are skipped.
inline LipschitzResult lipschitz_check(const Graph& g,
                                       const std::vector<double>& tau,
                                       double alpha, int n_pairs,
                                       std::mt19937_64& rng) {
  if (static_cast<int>(tau.size()) != g.size())
    throw invalid_input("lipschitz_check: tau length mismatch");
  if (n_pairs < 1) throw invalid_input("lipschitz_check: n_pairs must be >= 1");
  LipschitzResult res;
  for (double v : tau) res.bound = std::max(res.bound, std::abs(v));
  res.bound *= alpha;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(g.size());
  std::vector<double> p1(n), p2(n);
  for (int s = 0; s < n_pairs; ++s) {
    for (std::size_t i = 0; i < n; ++i) {
      p1[i] = u(rng);
      p2[i] = u(rng);
    }
    if (const auto ratio = lipschitz_ratio(g, tau, alpha, p1, p2)) {
      res.max_ratio = std::max(res.max_ratio, *ratio);
      ++res.pairs_used;
    }
  }
  res.ok = res.max_ratio <= res.bound + 1e-9;
  return res;
}

}  // namespace netcausal
