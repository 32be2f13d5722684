#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "helpers.hpp"
#include "netcausal/estimator.hpp"
#include "netcausal/grad_check.hpp"
#include "netcausal/policy.hpp"

using namespace netcausal;

namespace {

// Estimator whose heads are input-independent constants, so tau_hat == c1 - c0
// everywhere and the interference readout is exactly zero.
EstimatorModel const_head_estimator(int in_dim, double c0, double c1) {
  EstimatorConfig cfg;
  cfg.phi_dims = {4};
  cfg.gnn_dims = {4, 2};
  cfg.head_dims = {4};
  auto rng = make_rng(7, 1);
  EstimatorModel m = make_estimator(cfg, in_dim, rng);
  for (auto& l : m.h0.layers) {
    l.W->value.setZero();
    l.b->value.setZero();
  }
  for (auto& l : m.h1.layers) {
    l.W->value.setZero();
    l.b->value.setZero();
  }
  m.h0.layers.back().b->value(0, 0) = c0;
  m.h1.layers.back().b->value(0, 0) = c1;
  return m;
}

// Estimator reading off tau_hat(x) = a.x exactly: identity representation kept
// on the active relu side by a +5 bias, treated head undoing the shift, zero
// weight on every interference slot.
EstimatorModel linear_effect_estimator(const Vec& a) {
  const int p = static_cast<int>(a.size());
  EstimatorModel m;
  m.cfg.phi_dims = {p};
  m.cfg.gnn_dims = {4, 2};
  m.cfg.head_dims = {};
  m.in_dim = p;
  m.phi.layers.push_back(
      {make_var(Mat::Identity(p, p), true), make_var(Mat::Constant(1, p, 5.0), true)});
  m.gnn_w.push_back(make_var(Mat::Zero(p, 4), true));
  m.gnn_w.push_back(make_var(Mat::Zero(4, 2), true));
  Mat wh1 = Mat::Zero(p + 2 + 1, 1);
  for (int j = 0; j < p; ++j) wh1(j, 0) = a(j);
  Mat bh1(1, 1);
  bh1 << -5.0 * a.sum();
  m.h1.layers.push_back({make_var(wh1, true), make_var(bh1, true)});
  m.h0.layers.push_back(
      {make_var(Mat::Zero(p + 2 + 1, 1), true), make_var(Mat::Zero(1, 1), true)});
  return m;
}

// Minimal ground-truth dataset: y0 = 0 so outcomes are pure treatment effects.
Dataset truth_dataset(const Mat& x, const std::vector<double>& tau) {
  const int n = static_cast<int>(x.rows());
  Dataset d;
  d.x = x;
  d.has_truth = true;
  d.tau = tau;
  d.y0.assign(n, 0.0);
  d.delta.assign(n, 0.0);
  d.t.assign(n, 0.0);
  d.y.assign(n, 0.0);
  d.g_exposure.assign(n, 0.0);
  d.split.assign(n, 2);
  d.mode = AssignMode::randomized;
  d.p = 0.3;
  return d;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const int n = static_cast<int>(a.size());
  auto ranks = [n](const std::vector<double>& v) {
    std::vector<int> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int i, int j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (int k = 0; k < n; ++k) r[idx[k]] = k;
    return r;
  };
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double mean = (n - 1) / 2.0;
  double num = 0.0, da = 0.0, db = 0.0;
  for (int i = 0; i < n; ++i) {
    num += (ra[i] - mean) * (rb[i] - mean);
    da += (ra[i] - mean) * (ra[i] - mean);
    db += (rb[i] - mean) * (rb[i] - mean);
  }
  return num / std::sqrt(da * db);
}

PolicyConfig desk_policy_config() {
  PolicyConfig cfg;
  cfg.hidden = {16, 8};
  cfg.lr = 3e-3;
  cfg.epochs = 800;
  cfg.p_t = 0.3;
  cfg.mc_samples = 50;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST_CASE("true utility matches hand evaluations") {
  Graph path = Graph::from_edges(3, {{0, 1}, {1, 2}});
  Mat x = Mat::Zero(3, 1);

  Dataset d = truth_dataset(x, {2.5, 2.5, 2.5});
  CHECK(utility_true({1, 1, 1}, d, path, 0.0, 1) == Catch::Approx(2.5));
  CHECK(utility_true({0, 0, 0}, d, path, 0.0, 1) == Catch::Approx(-2.5));

  // pi = (1,0,1): only the middle node sees a treated neighbor on each side,
  // delta_1 = 0.5 * (2 + 3) / 2 = 1.25, so
  // S = ((2+0) - (-1+1.25) + (3+0)) / 3.
  Dataset d2 = truth_dataset(x, {2.0, -1.0, 3.0});
  CHECK(utility_true({1, 0, 1}, d2, path, 0.5, 1) ==
        Catch::Approx(4.75 / 3.0).margin(1e-12));

  Dataset no_truth = d;
  no_truth.has_truth = false;
  CHECK_THROWS_AS(utility_true({1, 1, 1}, no_truth, path, 0.0, 1), invalid_input);
  CHECK_THROWS_AS(utility_true({1, 1}, d, path, 0.0, 1), invalid_input);
}

TEST_CASE("true utility scales linearly with the effects") {
  std::mt19937_64 rng(11);
  Graph g = testutil::random_er_graph(16, 0.2, rng);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::vector<double> tau(16), pi(16);
  for (int i = 0; i < 16; ++i) {
    tau[i] = nd(rng);
    pi[i] = rng() % 2 ? 1.0 : 0.0;
  }
  Dataset d = truth_dataset(Mat::Zero(16, 1), tau);
  const double base = utility_true(pi, d, g, 0.5, 2);
  const double c = -3.7;
  Dataset ds = d;
  for (auto& v : ds.tau) v *= c;
  CHECK(utility_true(pi, ds, g, 0.5, 2) == Catch::Approx(c * base).margin(1e-12));
}

TEST_CASE("capped utility hand cases") {
  std::mt19937_64 rng(13);
  Graph g = testutil::random_er_graph(12, 0.25, rng);
  std::vector<double> tau(12);
  for (int i = 0; i < 12; ++i) tau[i] = 0.3 * i - 1.0;
  Dataset d = truth_dataset(Mat::Zero(12, 1), tau);

  // Mean policy within budget: the cap factor is 1 and the capped utility is
  // the plain one.
  std::vector<double> sparse(12, 0.0);
  sparse[2] = sparse[7] = sparse[9] = 1.0;  // mean 0.25 <= p_t
  CHECK(utility_capped(sparse, d, g, 0.5, 0.5, 1) ==
        Catch::Approx(utility_true(sparse, d, g, 0.5, 1)).margin(1e-12));

  // Treat-everyone at half the budget: weight 2 * 0.5 * 1 - 1 = 0.
  Dataset dc = truth_dataset(Mat::Zero(12, 1), std::vector<double>(12, 1.7));
  CHECK(utility_capped(std::vector<double>(12, 1.0), dc, g, 0.5, 0.0, 1) ==
        Catch::Approx(0.0).margin(1e-15));

  // Treat-nobody: mean probability 0 leaves the factor at 1 by convention and
  // every term is -(tau + delta(0)) = -tau.
  double mean_tau = std::accumulate(tau.begin(), tau.end(), 0.0) / 12.0;
  CHECK(utility_capped(std::vector<double>(12, 0.0), d, g, 0.3, 0.5, 1) ==
        Catch::Approx(-mean_tau).margin(1e-12));
}

TEST_CASE("estimated utility trivial constructions") {
  std::mt19937_64 grng(17);
  Graph g = testutil::random_er_graph(6, 0.4, grng);
  Mat x = Mat::Random(6, 2);
  GraphOps ops = make_graph_ops(g);

  // Symmetric heads: tau_hat = 0 and the 0.5 policy zeroes the factor.
  EstimatorModel sym = const_head_estimator(2, 1.0, 1.0);
  FrozenEstimator fe = freeze_estimator(sym, x);
  Tape tape;
  Var pi = make_var(Mat::Constant(6, 1, 0.5));
  Mat noise = sample_gumbel_noise(6, grng);
  CHECK(utility_est(tape, pi, fe, ops, noise, 0.5)->value(0, 0) ==
        Catch::Approx(0.0).margin(1e-15));

  // Constant gap c with no interference response: all-treat utility is c.
  const double c = -1.75;
  EstimatorModel gap = const_head_estimator(2, 0.0, c);
  FrozenEstimator feg = freeze_estimator(gap, x);
  std::vector<double> ones(6, 1.0);
  CHECK(utility_est_fixed(feg, ops, ones, ones) == Catch::Approx(c).margin(1e-12));
  Tape tape2;
  Var pi1 = make_var(Mat::Constant(6, 1, 1.0));
  CHECK(utility_est(tape2, pi1, feg, ops, Mat::Zero(6, 1), 0.5)->value(0, 0) ==
        Catch::Approx(c).margin(1e-12));

  Tape tape3;
  Var bad = make_var(Mat::Constant(5, 1, 0.5));
  CHECK_THROWS_AS(utility_est(tape3, bad, feg, ops, Mat::Zero(5, 1), 0.5),
                  invalid_input);
}

TEST_CASE("estimated utility tracks true utility without interference") {
  const int n = 40;
  std::mt19937_64 rng(21);
  Graph g = testutil::random_er_graph(n, 0.15, rng);
  Mat x = Mat::Random(n, 2);
  Vec a(2);
  a << 1.2, -0.8;
  EstimatorModel est = linear_effect_estimator(a);
  std::vector<double> tau(n);
  for (int i = 0; i < n; ++i) tau[i] = x.row(i).dot(a);
  Dataset d = truth_dataset(x, tau);

  std::vector<double> pi(n);
  for (int i = 0; i < n; ++i) pi[i] = 1.0 / (1.0 + std::exp(-0.8 * x(i, 0)));

  GraphOps ops = make_graph_ops(g);
  FrozenEstimator fe = freeze_estimator(est, x);
  auto mc_rng = make_rng(21, 2);
  const double s_hat = utility_est_mc(fe, ops, pi, 400, mc_rng);

  auto true_rng = make_rng(21, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double s_true = 0.0;
  std::vector<double> t(n);
  for (int s = 0; s < 400; ++s) {
    for (int i = 0; i < n; ++i) t[i] = u(true_rng) < pi[i] ? 1.0 : 0.0;
    s_true += utility_true(t, d, g, 0.0, 1);
  }
  s_true /= 400.0;
  CHECK(std::abs(s_hat - s_true) < 0.05);
}

TEST_CASE("training meets the capacity constraint when all effects are positive") {
  const int n = 60;
  std::mt19937_64 grng(23);
  Graph g = testutil::random_er_graph(n, 0.1, grng);
  Mat x = Mat::Random(n, 2);
  EstimatorModel est = const_head_estimator(2, 0.0, 1.0);

  PolicyConfig cfg = desk_policy_config();
  auto rng = make_rng(5, 0);
  PolicyModel pol = make_policy(cfg, 2, rng);
  PolicyTrainResult res = train_policy(pol, est, g, x);

  CHECK(res.residual <= cfg.feas_tol);
  CHECK(std::find(cfg.gamma_grid.begin(), cfg.gamma_grid.end(), res.gamma) !=
        cfg.gamma_grid.end());
  CHECK(pol.gamma == res.gamma);

  GraphOps ops = make_graph_ops(g);
  const Vec probs = policy_probs(pol, &ops, x);
  for (int i = 0; i < n; ++i) {
    CHECK(probs(i) > 0.0);
    CHECK(probs(i) < 1.0);
  }
  CHECK(probs.mean() == Catch::Approx(0.3).margin(0.02));
  // tau_hat is one everywhere and the interference readout is zero, so the
  // utility of any feasible policy sits at 2 * p_t - 1.
  CHECK(res.s_hat == Catch::Approx(-0.4).margin(0.05));
}

TEST_CASE("training concentrates treatment on positive estimated effects") {
  const int n = 60;
  std::mt19937_64 grng(29);
  Graph g = testutil::random_er_graph(n, 0.08, grng);
  Mat x(n, 1);
  std::vector<int> positive;
  for (int i = 0; i < n; ++i) {
    const bool pos = i % 10 < 3;  // exactly 18 nodes, matching p_t = 0.3
    x(i, 0) = pos ? 1.0 : -1.0;
    if (pos) positive.push_back(i);
  }
  Vec a(1);
  a << 1.0;
  EstimatorModel est = linear_effect_estimator(a);

  PolicyConfig cfg = desk_policy_config();
  auto rng = make_rng(5, 1);
  PolicyModel pol = make_policy(cfg, 1, rng);
  PolicyTrainResult res = train_policy(pol, est, g, x);
  CHECK(res.residual <= cfg.feas_tol);

  GraphOps ops = make_graph_ops(g);
  const Vec probs = policy_probs(pol, &ops, x);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) { return probs(i) > probs(j); });
  int overlap = 0;
  for (int k = 0; k < 18; ++k)
    if (std::find(positive.begin(), positive.end(), idx[k]) != positive.end())
      ++overlap;
  CHECK(overlap >= 17);  // at least 90% of the treated mass on positive nodes
}

TEST_CASE("gamma grid exhaustion raises with the closest residual") {
  const int n = 20;
  std::mt19937_64 grng(31);
  Graph g = testutil::random_er_graph(n, 0.2, grng);
  Mat x = Mat::Random(n, 1);
  EstimatorModel est = const_head_estimator(1, 0.0, 1.0);

  PolicyConfig cfg;
  cfg.hidden = {8};
  cfg.lr = 3e-3;
  cfg.epochs = 200;
  cfg.p_t = 0.0;          // unreachable for a sigmoid policy
  cfg.gamma_grid = {0.0};  // and nothing pulls the rate down
  cfg.seed = 9;
  auto rng = make_rng(9, 0);
  PolicyModel pol = make_policy(cfg, 1, rng);
  try {
    train_policy(pol, est, g, x);
    FAIL("expected infeasible_error");
  } catch (const infeasible_error& e) {
    CHECK(e.residual > 0.4);
  }
}

TEST_CASE("policy config validation") {
  PolicyConfig cfg;
  cfg.p_t = 1.0;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = PolicyConfig{};
  cfg.tau_g = 0.0;
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = PolicyConfig{};
  cfg.hidden.clear();
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = PolicyConfig{};
  cfg.gamma_grid.clear();
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
  cfg = PolicyConfig{};
  cfg.gamma_grid = {-1.0};
  CHECK_THROWS_AS(cfg.validate(), invalid_input);
}

TEST_CASE("self-comparison improvement is near zero") {
  const int n = 20;
  std::mt19937_64 grng(37);
  Graph g = testutil::random_er_graph(n, 0.2, grng);
  // Policy input encodes a fixed assignment of exactly 6 = round(0.3 * 20)
  // nodes; a steep linear layer turns it into near-binary probabilities, i.e.
  // one of the randomized draws.
  Mat x(n, 1);
  for (int i = 0; i < n; ++i) x(i, 0) = i % 10 < 3 ? 4.0 : -4.0;

  PolicyConfig cfg;
  cfg.p_t = 0.3;
  PolicyModel pol;
  pol.cfg = cfg;
  pol.in_dim = 1;
  pol.net.layers.push_back(
      {make_var(Mat::Constant(1, 1, 3.0), true), make_var(Mat::Zero(1, 1), true)});

  EstimatorModel est = const_head_estimator(1, 0.0, 1.0);
  Dataset d = truth_dataset(x, std::vector<double>(n, 1.0));

  auto rng = make_rng(37, 4);
  UtilityReport rep = evaluate_improvement(pol, est, d, g, 0.0, 1, 50, rng, 50);
  CHECK(rep.has_true);
  CHECK(std::abs(rep.delta_s_hat) < 0.02);
  CHECK(std::abs(rep.delta_s_true) < 0.02);
  CHECK(rep.realized_rate == Catch::Approx(0.3).margin(0.02));
  CHECK(rep.residual < 0.02);
  CHECK(rep.s_hat == Catch::Approx(-0.4).margin(0.02));

  auto j = report_to_json(rep);
  CHECK(j.contains("delta_s_hat"));
  CHECK(j.contains("delta_s_true"));
  CHECK(j.contains("residual"));

  auto rng2 = make_rng(37, 5);
  CHECK_THROWS_AS(evaluate_improvement(pol, est, d, g, 0.0, 1, 0, rng2),
                  invalid_input);
}

TEST_CASE("top-effect policy maximizes the true utility over all subsets") {
  const int n = 12, m = 4;
  Graph g = Graph::from_edges(n, {});
  std::vector<double> tau(n);
  for (int i = 0; i < n; ++i) tau[i] = i - 5.5;
  Dataset d = truth_dataset(Mat::Zero(n, 1), tau);

  double best = -1e300, sum = 0.0;
  int best_mask = -1, count = 0;
  for (int mask = 0; mask < (1 << n); ++mask) {
    if (__builtin_popcount(static_cast<unsigned>(mask)) != m) continue;
    std::vector<double> t(n, 0.0);
    for (int i = 0; i < n; ++i)
      if (mask & (1 << i)) t[i] = 1.0;
    const double s = utility_true(t, d, g, 0.0, 1);
    sum += s;
    ++count;
    if (s > best) {
      best = s;
      best_mask = mask;
    }
  }
  CHECK(count == 495);
  // Unique optimum treats the four largest effects.
  const int top_mask = (1 << 11) | (1 << 10) | (1 << 9) | (1 << 8);
  CHECK(best_mask == top_mask);
  CHECK(best - sum / count > 0.0);
}

TEST_CASE("improvement error shrinks with estimator fidelity") {
  const int n = 30, m = 10;
  std::mt19937_64 grng(41);
  Graph g = testutil::random_er_graph(n, 0.12, grng);
  Mat x = Mat::Random(n, 1);
  Vec a(1);
  a << 1.0;
  std::vector<double> tau(n);
  for (int i = 0; i < n; ++i) tau[i] = x(i, 0);
  Dataset d = truth_dataset(x, tau);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < n; ++i) {
    d.t[i] = coin(grng) ? 1.0 : 0.0;
    d.y[i] = d.t[i] * tau[i];
  }
  d.g_exposure = compute_exposure(g, d.t);

  // Fixed candidate policy (top effects) and shared randomized baselines.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) { return tau[i] > tau[j]; });
  std::vector<double> t_top(n, 0.0);
  for (int k = 0; k < m; ++k) t_top[order[k]] = 1.0;
  std::vector<std::vector<double>> draws;
  auto draw_rng = make_rng(41, 6);
  for (int s = 0; s < 40; ++s) {
    std::shuffle(order.begin(), order.end(), draw_rng);
    std::vector<double> t(n, 0.0);
    for (int k = 0; k < m; ++k) t[order[k]] = 1.0;
    draws.push_back(std::move(t));
  }
  const double s_true_top = utility_true(t_top, d, g, 0.0, 1);
  double s_true_base = 0.0;
  for (const auto& t : draws) s_true_base += utility_true(t, d, g, 0.0, 1);
  const double delta_true = s_true_top - s_true_base / 40.0;
  REQUIRE(delta_true > 0.1);

  GraphOps ops = make_graph_ops(g);
  std::vector<double> rmses, errs;
  for (double eps : {0.0, 0.25, 0.5, 1.0, 2.0}) {
    EstimatorModel est = linear_effect_estimator(a);
    est.h1.layers.back().W->value *= 1.0 + eps;
    est.h1.layers.back().b->value *= 1.0 + eps;
    auto yhat = predict_outcomes(est, g, x, d.t, d.g_exposure);
    auto tau_hat = extract_ite(est, x);
    auto met = compute_metrics(yhat, d.y, tau_hat, tau, d.test_indices());
    FrozenEstimator fe = freeze_estimator(est, x);
    const double s_hat_top = utility_est_fixed(fe, ops, t_top, t_top);
    double s_hat_base = 0.0;
    for (const auto& t : draws) s_hat_base += utility_est_fixed(fe, ops, t, t);
    const double delta_hat = s_hat_top - s_hat_base / 40.0;
    rmses.push_back(met.rmse);
    errs.push_back(std::abs(delta_hat - delta_true));
  }
  // Quality rises as test error falls; the improvement-estimate error must
  // fall with it.
  std::vector<double> quality;
  for (double r : rmses) quality.push_back(-r);
  CHECK(spearman(quality, errs) < -0.9);
}

TEST_CASE("policy loss gradient passes finite differences with frozen noise") {
  const int n = 8;
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < n; ++i) edges.emplace_back(i, i + 1);
  Graph g = Graph::from_edges(n, edges);
  Mat x = Mat::Random(n, 3);
  EstimatorConfig ecfg;
  ecfg.phi_dims = {6};
  ecfg.gnn_dims = {6, 3};
  ecfg.head_dims = {5};
  auto erng = make_rng(43, 0);
  EstimatorModel est = make_estimator(ecfg, 3, erng);
  GraphOps ops = make_graph_ops(g);
  FrozenEstimator fe = freeze_estimator(est, x);

  auto nrng = make_rng(43, 1);
  const Mat noise = sample_gumbel_noise(n, nrng);
  const double gamma = 7.0, p_t = 0.9;  // deviation stays one-sided, no kink

  for (PolicyNetKind kind : {PolicyNetKind::mlp, PolicyNetKind::onegnn}) {
    PolicyConfig cfg;
    cfg.net = kind;
    cfg.hidden = {6, 4};
    auto prng = make_rng(43, kind == PolicyNetKind::mlp ? 2 : 3);
    PolicyModel pol = make_policy(cfg, 3, prng);
    auto build = [&](Tape& tape) {
      Var pi = policy_forward(tape, pol, &ops, x);
      Var s = utility_est(tape, pi, fe, ops, noise, 0.5, false);
      Var dev = tape.sub(tape.mean_all(pi), make_scalar(p_t));
      Var absdev = tape.add(tape.relu(dev), tape.relu(tape.scale(dev, -1.0)));
      return tape.add(tape.scale(s, -1.0), tape.scale(absdev, gamma));
    };
    CHECK(grad_check(build, pol.params(), 1e-6) < 1e-4);
  }
}

TEST_CASE("policy model json round trip") {
  testutil::TempDir tmp;
  Mat x = Mat::Random(9, 3);
  std::mt19937_64 grng(47);
  Graph g = testutil::random_er_graph(9, 0.3, grng);
  GraphOps ops = make_graph_ops(g);

  for (PolicyNetKind kind : {PolicyNetKind::mlp, PolicyNetKind::onegnn}) {
    PolicyConfig cfg;
    cfg.net = kind;
    cfg.hidden = {5, 3};
    cfg.p_t = 0.25;
    auto rng = make_rng(47, kind == PolicyNetKind::mlp ? 0 : 1);
    PolicyModel pol = make_policy(cfg, 3, rng);
    pol.gamma = 50.0;
    const auto path = (tmp.path() / (policy_net_name(kind) + ".json")).string();
    save_policy(path, pol);
    PolicyModel back = load_policy(path);
    CHECK(back.cfg.net == kind);
    CHECK(back.cfg.p_t == 0.25);
    CHECK(back.gamma == 50.0);
    const Vec before = policy_probs(pol, &ops, x);
    const Vec after = policy_probs(back, &ops, x);
    for (int i = 0; i < 9; ++i) CHECK(before(i) == after(i));
  }

  EstimatorConfig ecfg;
  ecfg.phi_dims = {4};
  ecfg.gnn_dims = {4, 2};
  ecfg.head_dims = {4};
  auto erng = make_rng(47, 2);
  EstimatorModel est = make_estimator(ecfg, 3, erng);
  const auto wrong = (tmp.path() / "est.json").string();
  save_estimator(wrong, est);
  CHECK_THROWS_AS(load_policy(wrong), parse_error);
}
