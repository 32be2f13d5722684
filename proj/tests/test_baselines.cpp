#include <catch2/catch_amalgamated.hpp>

#include "netcausal/baselines.hpp"

#include "helpers.hpp"

using namespace netcausal;

namespace {

double r_squared(const std::vector<double>& pred,
                 const std::vector<double>& truth) {
  double mean = 0.0;
  for (double v : truth) mean += v;
  mean /= truth.size();
  double ss_res = 0.0, ss_tot = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
  }
  return 1.0 - ss_res / ss_tot;
}

// all rows in the train split, no graph exposure
Dataset flat_dataset(const Mat& x, std::vector<double> t,
                     std::vector<double> y) {
  Dataset d;
  d.x = x;
  d.t = std::move(t);
  d.y = std::move(y);
  d.g_exposure.assign(x.rows(), 0.0);
  d.split.assign(x.rows(), 0);
  return d;
}

}  // namespace

TEST_CASE("weighted ridge matches the dense normal equations") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  Mat x(20, 4);
  Vec y(20), w(20);
  for (int i = 0; i < 20; ++i) {
    for (int j = 0; j < 4; ++j) x(i, j) = nd(rng);
    y(i) = nd(rng);
    w(i) = 0.1 + std::abs(nd(rng));
  }
  const double lam = 0.5;
  auto reg = Regressor::ridge(lam);
  reg.fit(x, y, w);

  Mat xa(20, 5);
  xa.leftCols(4) = x;
  xa.col(4).setOnes();
  Mat a = xa.transpose() * w.asDiagonal() * xa;
  for (int j = 0; j < 4; ++j) a(j, j) += lam;
  Vec beta = a.ldlt().solve(xa.transpose() * (w.asDiagonal() * y));

  Mat probe = Mat::Random(7, 4);
  Vec got = reg.predict(probe);
  for (int i = 0; i < 7; ++i) {
    const double expect = probe.row(i).dot(beta.head(4)) + beta(4);
    CHECK(got(i) == Catch::Approx(expect).margin(1e-9));
  }
  CHECK_THROWS_AS(Regressor::ridge().predict(probe), invalid_input);
}

TEST_CASE("ridge shrinkage is monotone in lambda") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Mat x(40, 3);
  Vec y(40);
  for (int i = 0; i < 40; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
    y(i) = 2.0 * x(i, 0) - x(i, 2) + 0.1 * nd(rng);
  }
  double prev = std::numeric_limits<double>::infinity();
  for (double lam : {1e-3, 1.0, 10.0, 100.0, 1e4}) {
    auto reg = Regressor::ridge(lam);
    reg.fit(x, y);
    const double norm = reg.ridge_weights().norm();
    CHECK(norm <= prev + 1e-12);
    prev = norm;
  }
  CHECK(prev < 0.05);
}

TEST_CASE("mlp regressor fits a weighted linear target") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Mat x(80, 2);
  Vec y(80), w(80);
  for (int i = 0; i < 80; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    y(i) = 2.0 * x(i, 0) - x(i, 1);
    w(i) = 0.5 + std::abs(nd(rng));
  }
  auto reg = Regressor::mlp({16}, 7, 1200, 1e-2);
  reg.fit(x, y, w);
  Vec pred = reg.predict(x);
  CHECK(std::sqrt((pred - y).squaredNorm() / 80) < 0.1);
}

TEST_CASE("propensity estimation") {
  auto c = Propensity::constant(0.1);
  Mat x = Mat::Random(5, 2);
  for (int i = 0; i < 5; ++i) CHECK(c.predict(x)(i) == 0.1);
  CHECK_THROWS_AS(Propensity::constant(0.0), invalid_input);

  // labels independent of covariates: fitted probabilities near the base rate
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  Mat xi(2000, 3);
  std::vector<double> ti(2000);
  std::bernoulli_distribution coin(0.3);
  for (int i = 0; i < 2000; ++i) {
    for (int j = 0; j < 3; ++j) xi(i, j) = nd(rng);
    ti[i] = coin(rng) ? 1.0 : 0.0;
  }
  auto g = fit_propensity(xi, ti);
  Vec pr = g.predict(xi);
  CHECK(std::abs(pr.mean() - 0.3) < 0.05);

  // separable labels: predictions respect the clip bounds
  Mat xs(40, 1);
  std::vector<double> ts(40);
  for (int i = 0; i < 40; ++i) {
    xs(i, 0) = i < 20 ? -1.0 : 1.0;
    ts[i] = i < 20 ? 0.0 : 1.0;
  }
  auto gs = fit_propensity(xs, ts);
  Vec ps = gs.predict(xs);
  CHECK(ps.minCoeff() >= 0.02);
  CHECK(ps.maxCoeff() <= 0.98);

  CHECK_THROWS_AS(fit_propensity(xs, std::vector<double>(40, 1.0)),
                  invalid_input);
}

TEST_CASE("constant propensity reduces domain adaptation to unweighted fits") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> nd;
  Mat x(60, 3);
  std::vector<double> t(60), y(60);
  for (int i = 0; i < 60; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
    t[i] = i % 2 ? 1.0 : 0.0;
    y[i] = x(i, 0) + t[i] * (1.0 + x(i, 1)) + 0.1 * nd(rng);
  }
  Dataset d = flat_dataset(x, t, y);
  auto model = fit_da(d, Propensity::constant(0.5), RegKind::ridge);

  // replay the recipe with no weights at all
  std::vector<int> treated, control;
  for (int i = 0; i < 60; ++i) (t[i] > 0.5 ? treated : control).push_back(i);
  auto design = [&](const std::vector<int>& rows) {
    Mat out(static_cast<Eigen::Index>(rows.size()), 4);
    for (size_t i = 0; i < rows.size(); ++i) {
      out.row(static_cast<Eigen::Index>(i)).head(3) = x.row(rows[i]);
      out(static_cast<Eigen::Index>(i), 3) = 0.0;
    }
    return out;
  };
  auto pick = [&](const std::vector<int>& rows) {
    Vec out(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i)
      out(static_cast<Eigen::Index>(i)) = y[rows[i]];
    return out;
  };
  auto mu0 = Regressor::ridge();
  auto mu1 = Regressor::ridge();
  mu0.fit(design(control), pick(control));
  mu1.fit(design(treated), pick(treated));
  Mat x_all(60, 3);
  Vec dhat(60);
  Vec imput0 = mu0.predict(design(treated));
  Vec imput1 = mu1.predict(design(control));
  for (size_t i = 0; i < treated.size(); ++i) {
    x_all.row(static_cast<Eigen::Index>(i)) = x.row(treated[i]);
    dhat(static_cast<Eigen::Index>(i)) = y[treated[i]] - imput0(i);
  }
  for (size_t i = 0; i < control.size(); ++i) {
    x_all.row(static_cast<Eigen::Index>(treated.size() + i)) =
        x.row(control[i]);
    dhat(static_cast<Eigen::Index>(treated.size() + i)) =
        imput1(i) - y[control[i]];
  }
  auto effect = Regressor::ridge();
  effect.fit(x_all, dhat);

  Vec expect = effect.predict(x);
  auto got = baseline_predict_ite(model, x);
  for (int i = 0; i < 60; ++i)
    CHECK(got[i] == Catch::Approx(expect(i)).margin(1e-9));
}

TEST_CASE("domain adaptation recovers a noiseless multiplicative effect") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> nd;
  Mat x(300, 3);
  std::vector<double> t(300), y(300), tau(300);
  Vec w(3);
  w << 1.0, -2.0, 0.5;
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < 300; ++i) {
    for (int j = 0; j < 3; ++j) x(i, j) = nd(rng);
    tau[i] = x.row(i).dot(w);
    t[i] = coin(rng) ? 1.0 : 0.0;
    y[i] = t[i] * tau[i];
  }
  Dataset d = flat_dataset(x, t, y);
  auto model = fit_da(d, Propensity::constant(0.5), RegKind::ridge);
  auto ite = baseline_predict_ite(model, x);
  CHECK(r_squared(ite, tau) > 0.99);
}

TEST_CASE("per-arm sample guards") {
  Mat x = Mat::Random(10, 2);
  std::vector<double> t(10, 1.0);
  t[0] = 0.0;
  t[1] = 0.0;
  t[2] = 0.0;
  std::vector<double> y(10, 1.0);
  Dataset d = flat_dataset(x, t, y);
  CHECK_THROWS_AS(fit_da(d, Propensity::constant(0.5), RegKind::ridge),
                  invalid_input);
  CHECK_THROWS_AS(fit_dr(d, Propensity::constant(0.5), RegKind::ridge),
                  invalid_input);
  Dataset all_treated = flat_dataset(x, std::vector<double>(10, 1.0), y);
  CHECK_THROWS_AS(fit_dr(all_treated, Propensity::constant(0.5), RegKind::ridge),
                  invalid_input);
}

TEST_CASE("exact outcome fits make the pseudo-effect exact for any propensity") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> nd;
  const int n = 120;
  Mat x(n, 2);
  std::vector<double> t(n), y(n), tau(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    tau[i] = 1.0 + x(i, 1);
    t[i] = i % 2 ? 1.0 : 0.0;
    y[i] = 0.5 * x(i, 0) + t[i] * tau[i];  // noiseless, linear in [x, t]
  }
  Dataset d = flat_dataset(x, t, y);

  // deliberately wrong constant propensity; margin covers the default
  // ridge shrinkage of the refit
  auto model = fit_dr(d, Propensity::constant(0.3), RegKind::ridge);
  auto ite = baseline_predict_ite(model, x);
  for (int i = 0; i < n; ++i)
    CHECK(ite[i] == Catch::Approx(tau[i]).margin(1e-4));

  // and the identity itself, with an absurd propensity vector
  std::vector<int> treated, control;
  for (int i = 0; i < n; ++i) (t[i] > 0.5 ? treated : control).push_back(i);
  Mat xg(n, 3);
  for (int i = 0; i < n; ++i) {
    xg.row(i).head(2) = x.row(i);
    xg(i, 2) = 0.0;
  }
  auto mu0 = Regressor::ridge(1e-8);
  auto mu1 = Regressor::ridge(1e-8);
  Mat xg_c(control.size(), 3), xg_t(treated.size(), 3);
  Vec y_c(control.size()), y_t(treated.size());
  for (size_t i = 0; i < control.size(); ++i) {
    xg_c.row(static_cast<Eigen::Index>(i)) = xg.row(control[i]);
    y_c(static_cast<Eigen::Index>(i)) = y[control[i]];
  }
  for (size_t i = 0; i < treated.size(); ++i) {
    xg_t.row(static_cast<Eigen::Index>(i)) = xg.row(treated[i]);
    y_t(static_cast<Eigen::Index>(i)) = y[treated[i]];
  }
  mu0.fit(xg_c, y_c);
  mu1.fit(xg_t, y_t);
  Vec yv(n);
  for (int i = 0; i < n; ++i) yv(i) = y[i];
  Vec ghat = Vec::Constant(n, 0.07);
  auto pseudo = dr_pseudo_effect(xg, yv, t, ghat, mu0, mu1);
  for (int i = 0; i < n; ++i)
    CHECK(pseudo[i] == Catch::Approx(tau[i]).margin(1e-6));
}

TEST_CASE("dr pseudo-effect mean is unbiased for a constant effect") {
  const double c = 1.5;
  std::vector<double> seed_means;
  for (uint64_t seed = 0; seed < 8; ++seed) {
    auto rng = make_rng(seed, 50);
    std::normal_distribution<double> nd;
    const int n = 600;
    Mat x(n, 2);
    std::vector<double> t(n), y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = nd(rng);
      x(i, 1) = nd(rng);
      t[i] = i % 2 ? 1.0 : 0.0;
      y[i] = x(i, 0) - 0.5 * x(i, 1) + t[i] * c + 0.3 * nd(rng);
    }
    Dataset d = flat_dataset(x, t, y);
    auto model = fit_dr(d, Propensity::constant(0.5), RegKind::ridge);
    Mat xg(n, 3);
    for (int i = 0; i < n; ++i) {
      xg.row(i).head(2) = x.row(i);
      xg(i, 2) = 0.0;
    }
    Vec yv(n);
    for (int i = 0; i < n; ++i) yv(i) = y[i];
    auto pseudo = dr_pseudo_effect(xg, yv, t, Vec::Constant(n, 0.5), model.mu0,
                                   model.mu1);
    double mean = 0.0;
    for (double v : pseudo) mean += v;
    seed_means.push_back(mean / n);
  }
  double mean = 0.0;
  for (double v : seed_means) mean += v;
  mean /= seed_means.size();
  double var = 0.0;
  for (double v : seed_means) var += (v - mean) * (v - mean);
  var /= (seed_means.size() - 1);
  const double se = std::sqrt(var / seed_means.size());
  CHECK(std::abs(mean - c) < 3.0 * std::max(se, 1e-3));
}

TEST_CASE("zeroed outcome model with the true propensity stays unbiased") {
  auto rng = make_rng(77, 0);
  std::normal_distribution<double> nd;
  const int n = 4000;
  Mat x(n, 2);
  std::vector<double> t(n), y(n);
  std::bernoulli_distribution coin(0.5);
  double true_ate = 0.0;
  for (int i = 0; i < n; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    const double tau = 1.0 + 0.5 * x(i, 0);
    true_ate += tau;
    t[i] = coin(rng) ? 1.0 : 0.0;
    y[i] = 0.3 * x(i, 1) + t[i] * tau + 0.2 * nd(rng);
  }
  true_ate /= n;

  Mat xg(n, 3);
  for (int i = 0; i < n; ++i) {
    xg.row(i).head(2) = x.row(i);
    xg(i, 2) = 0.0;
  }
  auto zero0 = Regressor::ridge();
  auto zero1 = Regressor::ridge();
  zero0.fit(xg, Vec::Zero(n));
  zero1.fit(xg, Vec::Zero(n));
  Vec yv(n);
  for (int i = 0; i < n; ++i) yv(i) = y[i];
  auto pseudo = dr_pseudo_effect(xg, yv, t, Vec::Constant(n, 0.5), zero0, zero1);
  double mean = 0.0, var = 0.0;
  for (double v : pseudo) mean += v;
  mean /= n;
  for (double v : pseudo) var += (v - mean) * (v - mean);
  var /= (n - 1);
  CHECK(std::abs(mean - true_ate) < 3.0 * std::sqrt(var / n));
}

TEST_CASE("outcome predictions route arms and stay row-local") {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd;
  Mat x(40, 2);
  std::vector<double> t(40), y(40), gexp(40);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    t[i] = i % 2 ? 1.0 : 0.0;
    gexp[i] = 0.25;
    y[i] = x(i, 0) + t[i] * 2.0 + 0.05 * nd(rng);
  }
  Dataset d = flat_dataset(x, t, y);
  d.g_exposure = gexp;
  auto model = fit_da(d, Propensity::constant(0.5), RegKind::ridge);
  auto pred = baseline_predict_outcome(model, x, t, gexp);

  Mat xg(40, 3);
  for (int i = 0; i < 40; ++i) {
    xg.row(i).head(2) = x.row(i);
    xg(i, 2) = gexp[i];
  }
  Vec p0 = model.mu0.predict(xg), p1 = model.mu1.predict(xg);
  for (int i = 0; i < 40; ++i)
    CHECK(pred[i] == (t[i] > 0.5 ? p1(i) : p0(i)));

  Mat x2 = x;
  x2.row(5).swap(x2.row(30));
  std::vector<double> t2 = t, g2 = gexp;
  std::swap(t2[5], t2[30]);
  auto pred2 = baseline_predict_outcome(model, x2, t2, g2);
  CHECK(pred2[0] == pred[0]);
  CHECK(pred2[17] == pred[17]);
}

TEST_CASE("mlp backend handles both recipes") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> nd;
  const int n = 200;
  Mat x(n, 2);
  std::vector<double> t(n), y(n), tau(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = nd(rng);
    x(i, 1) = nd(rng);
    tau[i] = 1.0 + x(i, 0);
    t[i] = i % 2 ? 1.0 : 0.0;
    y[i] = 0.5 * x(i, 1) + t[i] * tau[i] + 0.05 * nd(rng);
  }
  Dataset d = flat_dataset(x, t, y);
  for (BaselineKind kind : {BaselineKind::da, BaselineKind::dr}) {
    auto model = kind == BaselineKind::da
                     ? fit_da(d, Propensity::constant(0.5), RegKind::mlp, 29)
                     : fit_dr(d, Propensity::constant(0.5), RegKind::mlp, 29);
    auto ite = baseline_predict_ite(model, x);
    CHECK(r_squared(ite, tau) > 0.9);
  }
}
