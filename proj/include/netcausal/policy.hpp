#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "netcausal/adam.hpp"
#include "netcausal/common.hpp"
#include "netcausal/estimator.hpp"
#include "netcausal/gumbel.hpp"
#include "netcausal/layers.hpp"
#include "netcausal/model_io.hpp"
#include "netcausal/synthgen.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

enum class PolicyNetKind { mlp, onegnn };

inline std::string policy_net_name(PolicyNetKind k) {
  return k == PolicyNetKind::mlp ? "mlp" : "onegnn";
}

inline PolicyNetKind policy_net_from_name(const std::string& s) {
  if (s == "mlp") return PolicyNetKind::mlp;
  if (s == "onegnn") return PolicyNetKind::onegnn;
  throw invalid_input("unknown policy net kind: " + s);
}

struct PolicyConfig {
  PolicyNetKind net = PolicyNetKind::mlp;
  std::vector<int> hidden{64, 32};
  double dim_scale = 1.0;
  double p_t = 0.3;
  double tau_g = 0.5;
  double lr = 1e-3;
  int epochs = 2000;
  std::vector<double> gamma_grid{5.0, 50.0, 100.0, 200.0, 500.0};
  double feas_tol = 0.01;
  int residual_samples = 1000;
  int mc_samples = 200;
  std::uint64_t seed = 1;

  void validate() const {
    // p_t = 0 is accepted so callers can probe the infeasible branch; a
    // sigmoid head never reaches an exact-zero treatment rate.
    if (p_t < 0.0 || p_t >= 1.0)
      throw invalid_input("policy: p_t must lie in [0, 1)");
    if (tau_g <= 0.0) throw invalid_input("policy: tau_g must be positive");
    if (lr <= 0.0) throw invalid_input("policy: lr must be positive");
    if (epochs < 1) throw invalid_input("policy: epochs must be >= 1");
    if (hidden.empty()) throw invalid_input("policy: hidden dims required");
    for (int h : hidden)
      if (h < 1) throw invalid_input("policy: hidden dims must be positive");
    if (dim_scale <= 0.0) throw invalid_input("policy: dim_scale must be positive");
    if (gamma_grid.empty()) throw invalid_input("policy: gamma grid required");
    for (double gm : gamma_grid)
      if (gm < 0.0) throw invalid_input("policy: gamma must be >= 0");
    if (feas_tol <= 0.0) throw invalid_input("policy: feas_tol must be positive");
    if (residual_samples < 1 || mc_samples < 1)
      throw invalid_input("policy: sample counts must be >= 1");
  }
};

// Treatment policy head. The network emits a logit per node; forward applies
// sigmoid so probabilities stay in (0,1). The onegnn variant prepends one
// graph layer so the policy can read neighborhood context.
struct PolicyModel {
  PolicyConfig cfg;
  int in_dim = 0;
  Mlp net;
  Var gw1, gw2;  // set only for the onegnn variant
  double gamma = 0.0;  // constraint weight picked by training

  std::vector<Var> params() const {
    std::vector<Var> ps = net.params();
    if (gw1) ps.push_back(gw1);
    if (gw2) ps.push_back(gw2);
    return ps;
  }
};

inline PolicyModel make_policy(const PolicyConfig& cfg, int in_dim,
                               std::mt19937_64& rng) {
  cfg.validate();
  if (in_dim < 1) throw invalid_input("policy: in_dim must be >= 1");
  PolicyModel pol;
  pol.cfg = cfg;
  pol.in_dim = in_dim;
  std::vector<int> dims{in_dim};
  for (int h : cfg.hidden) dims.push_back(scaled_dim(h, cfg.dim_scale));
  dims.push_back(1);
  if (cfg.net == PolicyNetKind::onegnn) {
    // First hidden width is produced by the graph layer instead of a dense one.
    pol.gw1 = make_var(glorot_uniform(in_dim, dims[1], rng), true);
    pol.gw2 = make_var(glorot_uniform(in_dim, dims[1], rng), true);
    pol.net = make_mlp(std::vector<int>(dims.begin() + 1, dims.end()), rng);
  } else {
    pol.net = make_mlp(dims, rng);
  }
  return pol;
}

// ops may be null for the mlp variant; the onegnn variant needs the graph.
inline Var policy_forward(Tape& tape, const PolicyModel& pol,
                          const GraphOps* ops, const Mat& x) {
  if (x.cols() != pol.in_dim)
    throw invalid_input("policy_forward: input width " +
                        std::to_string(x.cols()) + " != " +
                        std::to_string(pol.in_dim));
  Var h = make_var(x);
  if (pol.cfg.net == PolicyNetKind::onegnn) {
    if (!ops) throw invalid_input("policy_forward: onegnn variant needs graph ops");
    h = onegnn_layer(tape, h, ops->nmean, pol.gw1, pol.gw2, true);
  }
  Var z = mlp_forward(tape, pol.net, h);
  return tape.sigmoid(z);
}

inline Vec policy_probs(const PolicyModel& pol, const GraphOps* ops, const Mat& x) {
  Tape tape;
  return policy_forward(tape, pol, ops, x)->value.col(0);
}

// Value-level snapshot of a trained estimator. Stack weights and the treated
// head are copied as constants so policy gradients never reach them; tau_hat
// and the zero-input head responses are cached because they do not depend on
// the policy.
struct FrozenEstimator {
  GnnKind kind = GnnKind::gcn;
  bool use_exposure = true;
  double y_scale = 1.0;
  int n = 0;
  Var phi;                      // representation values, constant
  std::vector<Var> w1, w2;      // stack weights, constant
  Mlp h1;                       // treated head, constant copies
  Mat h1_zero;                  // h1 on zeroed interference slots, standardized
  std::vector<double> tau_hat;  // effect estimates in outcome units
};

inline FrozenEstimator freeze_estimator(const EstimatorModel& est, const Mat& x) {
  if (x.cols() != est.in_dim)
    throw invalid_input("freeze_estimator: input width mismatch");
  FrozenEstimator fe;
  fe.kind = est.cfg.gnn_kind;
  fe.use_exposure = est.cfg.use_exposure;
  fe.y_scale = est.y_scale;
  fe.n = static_cast<int>(x.rows());
  Tape tape;
  Var r = mlp_forward(tape, est.phi, make_var(x), true);
  fe.phi = make_var(r->value);
  for (const auto& w : est.gnn_w) fe.w1.push_back(make_var(w->value));
  for (const auto& w : est.gnn_w2) fe.w2.push_back(make_var(w->value));
  for (const auto& l : est.h1.layers)
    fe.h1.layers.push_back({make_var(l.W->value), make_var(l.b->value)});
  const int zdim = static_cast<int>(est.gnn_w.back()->value.cols());
  Var zeros_z = make_var(Mat::Zero(fe.n, zdim));
  Var zeros_g = make_var(Mat::Zero(fe.n, 1));
  Var at_zero = mlp_forward(tape, fe.h1,
                            tape.concat_cols({fe.phi, zeros_z, zeros_g}));
  fe.h1_zero = at_zero->value;
  fe.tau_hat = extract_ite(est, x);
  return fe;
}

inline Var frozen_gnn_stack(Tape& tape, const FrozenEstimator& fe,
                            const GraphOps& ops, Var h) {
  const std::size_t depth = fe.w1.size();
  for (std::size_t l = 0; l < depth; ++l) {
    const bool act = l + 1 < depth;
    switch (fe.kind) {
      case GnnKind::gcn:
        h = gcn_layer(tape, h, ops.norm, fe.w1[l], act);
        break;
      case GnnKind::sage:
        h = sage_layer(tape, h, ops.mean_self, fe.w1[l], act);
        break;
      case GnnKind::onegnn:
        h = onegnn_layer(tape, h, ops.nmean, fe.w1[l], fe.w2[l], act);
        break;
    }
  }
  return h;
}

namespace detail {

// Shared core: utility for one treatment column. t drives the interference
// slots (representation mask and exposure); pi supplies the (2*pi - 1) factor.
// Both tape paths (relaxed training samples) and eager evaluations route
// through here so the two can never drift apart.
inline Var utility_core(Tape& tape, const FrozenEstimator& fe,
                        const GraphOps& ops, const Var& t, const Var& pi) {
  Var masked = tape.row_scale(fe.phi, t);
  Var z = frozen_gnn_stack(tape, fe, ops, masked);
  Var g = fe.use_exposure ? tape.spmm(ops.nmean, t)
                          : make_var(Mat::Zero(fe.n, 1));
  Var treated = mlp_forward(tape, fe.h1, tape.concat_cols({fe.phi, z, g}));
  Var delta = tape.scale(tape.sub(treated, make_var(fe.h1_zero)), fe.y_scale);
  Mat tau_col(fe.n, 1);
  for (int i = 0; i < fe.n; ++i) tau_col(i, 0) = fe.tau_hat[i];
  Var gain = tape.add(make_var(tau_col), delta);
  Var factor = tape.sub(tape.scale(pi, 2.0), make_var(Mat::Ones(fe.n, 1)));
  return tape.mean_all(tape.mul(factor, gain));
}

inline Mat column_of(const std::vector<double>& v) {
  Mat m(static_cast<Eigen::Index>(v.size()), 1);
  for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, 0) = v[static_cast<std::size_t>(i)];
  return m;
}

}  // namespace detail

// Differentiable estimated utility: assignments drawn with the Gumbel
// relaxation feed the interference slots, the soft policy probabilities
// weight the gains. hard=true emits straight-through samples (training);
// hard=false keeps the smooth relaxation, whose forward matches the backward
// exactly, so finite differences can validate it. Gradients reach only the
// policy.
inline Var utility_est(Tape& tape, const Var& pi, const FrozenEstimator& fe,
                       const GraphOps& ops, const Mat& noise, double tau_g,
                       bool hard = true) {
  if (pi->value.rows() != fe.n || pi->value.cols() != 1)
    throw invalid_input("utility_est: policy/estimator size mismatch");
  Var t = tape.gumbel_st(pi, noise, tau_g, hard);
  return detail::utility_core(tape, fe, ops, t, pi);
}

// Estimated utility for one fixed assignment (no gradients).
inline double utility_est_fixed(const FrozenEstimator& fe, const GraphOps& ops,
                                const std::vector<double>& t,
                                const std::vector<double>& pi) {
  if (static_cast<int>(t.size()) != fe.n || static_cast<int>(pi.size()) != fe.n)
    throw invalid_input("utility_est_fixed: policy/estimator size mismatch");
  Tape tape;
  return detail::utility_core(tape, fe, ops, make_var(detail::column_of(t)),
                              make_var(detail::column_of(pi)))
      ->value(0, 0);
}

// Monte-Carlo estimated utility of a stochastic policy: assignments sampled
// Bernoulli(pi) per draw, soft probabilities kept in the utility factor.
inline double utility_est_mc(const FrozenEstimator& fe, const GraphOps& ops,
                             const std::vector<double>& pi, int samples,
                             std::mt19937_64& rng) {
  if (samples < 1) throw invalid_input("utility_est_mc: samples must be >= 1");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double acc = 0.0;
  std::vector<double> t(pi.size(), 0.0);
  for (int s = 0; s < samples; ++s) {
    for (std::size_t i = 0; i < pi.size(); ++i) t[i] = u(rng) < pi[i] ? 1.0 : 0.0;
    acc += utility_est_fixed(fe, ops, t, pi);
  }
  return acc / static_cast<double>(samples);
}

// Utility under ground-truth effects: spillovers recomputed for the given
// assignment from the same response used by the generator.
inline double utility_true(const std::vector<double>& pi_treat, const Dataset& d,
                           const Graph& g, double alpha, int order) {
  if (!d.has_truth)
    throw invalid_input("utility_true: dataset carries no ground-truth effects");
  if (static_cast<int>(pi_treat.size()) != d.n() || g.size() != d.n())
    throw invalid_input("utility_true: size mismatch");
  const auto delta = gen_spillover(g, pi_treat, d.tau, alpha, order);
  double acc = 0.0;
  for (int i = 0; i < d.n(); ++i)
    acc += (2.0 * pi_treat[i] - 1.0) * (d.tau[i] + delta[i]);
  return acc / static_cast<double>(d.n());
}

// Capacity-capped true utility: the treat weight is scaled by
// min{1, p_t / P(pi)} where P(pi) is the mean policy probability. P(pi) = 0
// leaves the factor at 1 by convention (the cap only ever shrinks weights).
inline double utility_capped(const std::vector<double>& pi, const Dataset& d,
                             const Graph& g, double p_t, double alpha,
                             int order) {
  if (!d.has_truth)
    throw invalid_input("utility_capped: dataset carries no ground-truth effects");
  if (static_cast<int>(pi.size()) != d.n() || g.size() != d.n())
    throw invalid_input("utility_capped: size mismatch");
  if (p_t < 0.0) throw invalid_input("utility_capped: p_t must be >= 0");
  double mean_pi = 0.0;
  for (double p : pi) mean_pi += p;
  mean_pi /= static_cast<double>(d.n());
  const double factor = mean_pi > 0.0 ? std::min(1.0, p_t / mean_pi) : 1.0;
  const auto delta = gen_spillover(g, pi, d.tau, alpha, order);
  double acc = 0.0;
  for (int i = 0; i < d.n(); ++i)
    acc += (2.0 * factor * pi[i] - 1.0) * (d.tau[i] + delta[i]);
  return acc / static_cast<double>(d.n());
}

struct PolicyTrainResult {
  double gamma = 0.0;
  double residual = std::numeric_limits<double>::infinity();
  double s_hat = 0.0;  // Monte-Carlo estimated utility of the accepted policy
  std::vector<double> gamma_residuals;  // one per grid entry tried, in order
};

namespace detail {

// |mean hard-treatment rate - p_t| over sampled Bernoulli assignments.
inline double constraint_residual(const std::vector<double>& pi, double p_t,
                                  int samples, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double rate = 0.0;
  for (int s = 0; s < samples; ++s) {
    int treated = 0;
    for (double p : pi) treated += u(rng) < p ? 1 : 0;
    rate += static_cast<double>(treated) / static_cast<double>(pi.size());
  }
  rate /= static_cast<double>(samples);
  return std::abs(rate - p_t);
}

}  // namespace detail

// Constrained policy search: for each constraint weight in the grid, retrain
// from scratch against the frozen estimator and accept the first policy whose
// sampled treatment rate lands within feas_tol of p_t.
inline PolicyTrainResult train_policy(PolicyModel& pol, const EstimatorModel& est,
                                      const Graph& g, const Mat& x) {
  const PolicyConfig& cfg = pol.cfg;
  cfg.validate();
  if (x.rows() != g.size())
    throw invalid_input("train_policy: graph/feature size mismatch");
  if (x.cols() != est.in_dim)
    throw invalid_input("train_policy: estimator input width mismatch");
  const GraphOps ops = make_graph_ops(g);
  const FrozenEstimator fe = freeze_estimator(est, x);
  const int n = fe.n;

  PolicyTrainResult result;
  double best_residual = std::numeric_limits<double>::infinity();
  for (std::size_t gi = 0; gi < cfg.gamma_grid.size(); ++gi) {
    const double gamma = cfg.gamma_grid[gi];
    auto init_rng = make_rng(cfg.seed, 30 + gi);
    PolicyModel cand = make_policy(cfg, pol.in_dim, init_rng);
    auto noise_rng = make_rng(cfg.seed, 60 + gi);
    std::vector<Var> params = cand.params();
    AdamState adam;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      Tape tape;
      Var pi = policy_forward(tape, cand, &ops, x);
      const Mat noise = sample_gumbel_noise(n, noise_rng);
      Var s = utility_est(tape, pi, fe, ops, noise, cfg.tau_g);
      Var dev = tape.sub(tape.mean_all(pi), make_scalar(cfg.p_t));
      // |dev| assembled from two relu arms; the loss pulls the mean rate
      // toward p_t from either side.
      Var absdev = tape.add(tape.relu(dev), tape.relu(tape.scale(dev, -1.0)));
      Var loss = tape.add(tape.scale(s, -1.0), tape.scale(absdev, gamma));
      if (!std::isfinite(loss->value(0, 0)))
        throw training_error("policy training diverged at gamma " +
                             std::to_string(gamma));
      zero_grad(params);
      tape.backward(loss);
      adam_step(params, adam, cfg.lr);
    }
    const Vec probs = policy_probs(cand, &ops, x);
    std::vector<double> pi_vec(probs.data(), probs.data() + probs.size());
    auto check_rng = make_rng(cfg.seed, 90 + gi);
    const double res = detail::constraint_residual(pi_vec, cfg.p_t,
                                                   cfg.residual_samples,
                                                   check_rng);
    result.gamma_residuals.push_back(res);
    best_residual = std::min(best_residual, res);
    log_info("policy gamma " + std::to_string(gamma) + " residual " +
             std::to_string(res));
    if (res <= cfg.feas_tol) {
      pol.net = cand.net;
      pol.gw1 = cand.gw1;
      pol.gw2 = cand.gw2;
      pol.gamma = gamma;
      result.gamma = gamma;
      result.residual = res;
      auto mc_rng = make_rng(cfg.seed, 120);
      result.s_hat = utility_est_mc(fe, ops, pi_vec, cfg.mc_samples, mc_rng);
      return result;
    }
  }
  throw infeasible_error(
      "no gamma in the grid met the treatment-rate constraint (closest residual " +
          std::to_string(best_residual) + ", tolerance " +
          std::to_string(cfg.feas_tol) + ")",
      best_residual);
}

struct UtilityReport {
  double s_hat = 0.0;
  double s_true = 0.0;
  bool has_true = false;
  double base_s_hat = 0.0;
  double base_s_true = 0.0;
  double delta_s_hat = 0.0;
  double delta_s_true = 0.0;
  double residual = 0.0;       // |realized treatment rate - p_t|
  double realized_rate = 0.0;  // mean hard rate over policy samples
};

// Compares the policy against randomized baselines treating exactly
// round(p_t * n) nodes. Policy utilities are Monte-Carlo averages over
// Bernoulli(pi) assignments; true utilities are reported when the dataset
// carries ground-truth effects.
inline UtilityReport evaluate_improvement(const PolicyModel& pol,
                                          const EstimatorModel& est,
                                          const Dataset& d, const Graph& g,
                                          double alpha, int order, int n_random,
                                          std::mt19937_64& rng,
                                          int policy_samples = 200) {
  if (n_random < 1)
    throw invalid_input("evaluate_improvement: n_random must be >= 1");
  if (policy_samples < 1)
    throw invalid_input("evaluate_improvement: policy_samples must be >= 1");
  if (d.n() != g.size()) throw invalid_input("evaluate_improvement: size mismatch");
  const GraphOps ops = make_graph_ops(g);
  const FrozenEstimator fe = freeze_estimator(est, d.x);
  const int n = fe.n;
  const Vec probs = policy_probs(pol, &ops, d.x);
  std::vector<double> pi_vec(probs.data(), probs.data() + probs.size());

  UtilityReport rep;
  rep.has_true = d.has_truth;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> t(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < policy_samples; ++s) {
    double treated = 0.0;
    for (int i = 0; i < n; ++i) {
      t[static_cast<std::size_t>(i)] = u(rng) < pi_vec[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
      treated += t[static_cast<std::size_t>(i)];
    }
    rep.realized_rate += treated / static_cast<double>(n);
    rep.s_hat += utility_est_fixed(fe, ops, t, pi_vec);
    if (d.has_truth) rep.s_true += utility_true(t, d, g, alpha, order);
  }
  rep.realized_rate /= static_cast<double>(policy_samples);
  rep.s_hat /= static_cast<double>(policy_samples);
  if (d.has_truth) rep.s_true /= static_cast<double>(policy_samples);
  rep.residual = std::abs(rep.realized_rate - pol.cfg.p_t);

  const int m = static_cast<int>(std::lround(pol.cfg.p_t * n));
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (int s = 0; s < n_random; ++s) {
    std::shuffle(idx.begin(), idx.end(), rng);
    std::fill(t.begin(), t.end(), 0.0);
    for (int k = 0; k < m; ++k) t[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = 1.0;
    rep.base_s_hat += utility_est_fixed(fe, ops, t, t);
    if (d.has_truth) rep.base_s_true += utility_true(t, d, g, alpha, order);
  }
  rep.base_s_hat /= static_cast<double>(n_random);
  if (d.has_truth) rep.base_s_true /= static_cast<double>(n_random);
  rep.delta_s_hat = rep.s_hat - rep.base_s_hat;
  if (d.has_truth) rep.delta_s_true = rep.s_true - rep.base_s_true;
  return rep;
}

inline nlohmann::json report_to_json(const UtilityReport& r) {
  nlohmann::json j{{"s_hat", r.s_hat},
                   {"delta_s_hat", r.delta_s_hat},
                   {"base_s_hat", r.base_s_hat},
                   {"residual", r.residual},
                   {"realized_rate", r.realized_rate}};
  if (r.has_true) {
    j["s_true"] = r.s_true;
    j["base_s_true"] = r.base_s_true;
    j["delta_s_true"] = r.delta_s_true;
  }
  return j;
}

inline nlohmann::json policy_to_json(const PolicyModel& pol) {
  nlohmann::json cfg{{"net", policy_net_name(pol.cfg.net)},
                     {"hidden", pol.cfg.hidden},
                     {"dim_scale", pol.cfg.dim_scale},
                     {"p_t", pol.cfg.p_t},
                     {"tau_g", pol.cfg.tau_g},
                     {"lr", pol.cfg.lr},
                     {"epochs", pol.cfg.epochs},
                     {"gamma_grid", pol.cfg.gamma_grid},
                     {"feas_tol", pol.cfg.feas_tol},
                     {"residual_samples", pol.cfg.residual_samples},
                     {"mc_samples", pol.cfg.mc_samples},
                     {"seed", pol.cfg.seed}};
  nlohmann::json j{{"config", std::move(cfg)},
                   {"in_dim", pol.in_dim},
                   {"gamma", pol.gamma},
                   {"net", mlp_to_json(pol.net)}};
  if (pol.cfg.net == PolicyNetKind::onegnn) {
    j["gw1"] = mat_to_json(pol.gw1->value);
    j["gw2"] = mat_to_json(pol.gw2->value);
  }
  return j;
}

inline PolicyModel policy_from_json(const nlohmann::json& j) {
  PolicyModel pol;
  const auto& c = j.at("config");
  pol.cfg.net = policy_net_from_name(c.at("net").get<std::string>());
  pol.cfg.hidden = c.at("hidden").get<std::vector<int>>();
  pol.cfg.dim_scale = c.at("dim_scale").get<double>();
  pol.cfg.p_t = c.at("p_t").get<double>();
  pol.cfg.tau_g = c.at("tau_g").get<double>();
  pol.cfg.lr = c.at("lr").get<double>();
  pol.cfg.epochs = c.at("epochs").get<int>();
  pol.cfg.gamma_grid = c.at("gamma_grid").get<std::vector<double>>();
  pol.cfg.feas_tol = c.at("feas_tol").get<double>();
  pol.cfg.residual_samples = c.at("residual_samples").get<int>();
  pol.cfg.mc_samples = c.at("mc_samples").get<int>();
  pol.cfg.seed = c.at("seed").get<std::uint64_t>();
  pol.cfg.validate();
  pol.in_dim = j.at("in_dim").get<int>();
  pol.gamma = j.at("gamma").get<double>();
  pol.net = mlp_from_json(j.at("net"));
  if (pol.cfg.net == PolicyNetKind::onegnn) {
    pol.gw1 = make_var(mat_from_json(j.at("gw1")), true);
    pol.gw2 = make_var(mat_from_json(j.at("gw2")), true);
  }
  return pol;
}

inline void save_policy(const std::string& path, const PolicyModel& pol) {
  write_model_file(path, "policy", policy_to_json(pol));
}

inline PolicyModel load_policy(const std::string& path) {
  return policy_from_json(read_model_file(path, "policy"));
}

}  // namespace netcausal
