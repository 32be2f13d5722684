#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "netcausal/adam.hpp"
#include "netcausal/common.hpp"
#include "netcausal/layers.hpp"
#include "netcausal/model_io.hpp"
#include "netcausal/synthgen.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

enum class RegKind { ridge, mlp };

inline std::string reg_kind_name(RegKind k) {
  return k == RegKind::ridge ? "ridge" : "mlp";
}

inline RegKind reg_kind_from_name(const std::string& s) {
  if (s == "ridge") return RegKind::ridge;
  if (s == "mlp") return RegKind::mlp;
  throw invalid_input("unknown regressor kind '" + s + "'");
}

// Pluggable outcome regressor with optional per-sample weights. Ridge solves
// the weighted normal equations (intercept unpenalized); the mlp backend
// minimizes weighted MSE on internally standardized targets.
class Regressor {
 public:
  static Regressor ridge(double lambda = 1e-3) {
    Regressor r;
    r.kind_ = RegKind::ridge;
    r.lambda_ = std::max(lambda, 1e-8);
    return r;
  }

  static Regressor mlp(std::vector<int> hidden, uint64_t seed,
                       int epochs = 1500, double lr = 1e-2) {
    Regressor r;
    r.kind_ = RegKind::mlp;
    r.hidden_ = std::move(hidden);
    r.seed_ = seed;
    r.epochs_ = epochs;
    r.lr_ = lr;
    return r;
  }

  RegKind kind() const { return kind_; }
  bool fitted() const { return fitted_; }
  const Vec& ridge_weights() const { return w_; }

  void fit(const Mat& x, const Vec& y, const Vec& weights = Vec()) {
    const int n = static_cast<int>(x.rows());
    if (n < 1) throw invalid_input("regressor needs at least one row");
    if (y.size() != n) throw invalid_input("regressor target length mismatch");
    if (weights.size() != 0) {
      if (weights.size() != n)
        throw invalid_input("regressor weight length mismatch");
      if ((weights.array() < 0.0).any())
        throw invalid_input("regressor weights must be nonnegative");
    }
    if (kind_ == RegKind::ridge)
      fit_ridge(x, y, weights);
    else
      fit_mlp(x, y, weights);
    fitted_ = true;
  }

  Vec predict(const Mat& x) const {
    if (!fitted_) throw invalid_input("regressor used before fit");
    if (x.cols() != in_dim_)
      throw invalid_input("regressor feature width mismatch");
    if (kind_ == RegKind::ridge) return (x * w_).array() + b_;
    Tape tape;
    Var out = mlp_forward(tape, net_, make_var(x), false);
    return out->value.col(0) * y_scale_ + Vec::Constant(x.rows(), y_mean_);
  }

  nlohmann::json to_json() const {
    if (!fitted_) throw invalid_input("cannot serialize an unfitted regressor");
    nlohmann::json j{{"kind", reg_kind_name(kind_)}, {"in_dim", in_dim_}};
    if (kind_ == RegKind::ridge) {
      j["lambda"] = lambda_;
      j["w"] = std::vector<double>(w_.data(), w_.data() + w_.size());
      j["b"] = b_;
    } else {
      j["net"] = mlp_to_json(net_);
      j["y_mean"] = y_mean_;
      j["y_scale"] = y_scale_;
    }
    return j;
  }

  static Regressor from_json(const nlohmann::json& j) {
    Regressor r;
    r.kind_ = reg_kind_from_name(j.at("kind").get<std::string>());
    r.in_dim_ = j.at("in_dim").get<int>();
    if (r.in_dim_ < 1) throw parse_error("regressor record has bad in_dim");
    if (r.kind_ == RegKind::ridge) {
      r.lambda_ = j.at("lambda").get<double>();
      const auto wv = j.at("w").get<std::vector<double>>();
      if (static_cast<int>(wv.size()) != r.in_dim_)
        throw parse_error("regressor weight length disagrees with in_dim");
      r.w_ = Eigen::Map<const Vec>(wv.data(), wv.size());
      r.b_ = j.at("b").get<double>();
    } else {
      r.net_ = mlp_from_json(j.at("net"));
      if (r.net_.layers.front().W->value.rows() != r.in_dim_)
        throw parse_error("regressor net width disagrees with in_dim");
      r.y_mean_ = j.at("y_mean").get<double>();
      r.y_scale_ = j.at("y_scale").get<double>();
    }
    r.fitted_ = true;
    return r;
  }

 private:
  void fit_ridge(const Mat& x, const Vec& y, const Vec& weights) {
    const int p = static_cast<int>(x.cols());
    in_dim_ = p;
    Mat xa(x.rows(), p + 1);
    xa.leftCols(p) = x;
    xa.col(p).setOnes();
    Mat a;
    Vec rhs;
    if (weights.size() != 0) {
      a = xa.transpose() * weights.asDiagonal() * xa;
      rhs = xa.transpose() * (weights.asDiagonal() * y);
    } else {
      a = xa.transpose() * xa;
      rhs = xa.transpose() * y;
    }
    double lam = lambda_;
    for (int attempt = 0; attempt < 4; ++attempt, lam *= 100.0) {
      Mat areg = a;
      for (int j = 0; j < p; ++j) areg(j, j) += lam;
      Eigen::LDLT<Mat> ldlt(areg);
      if (ldlt.info() != Eigen::Success) continue;
      Vec beta = ldlt.solve(rhs);
      if (!beta.allFinite()) continue;
      w_ = beta.head(p);
      b_ = beta(p);
      return;
    }
    throw numeric_error("ridge system stayed singular through jitter retries");
  }

  void fit_mlp(const Mat& x, const Vec& y, const Vec& weights) {
    const int n = static_cast<int>(x.rows());
    in_dim_ = static_cast<int>(x.cols());
    y_mean_ = y.mean();
    const double var = (y.array() - y_mean_).square().mean();
    y_scale_ = var > 1e-24 ? std::sqrt(var) : 1.0;
    Mat target = (y.array() - y_mean_).matrix() / y_scale_;

    Mat wn = Mat::Ones(n, 1);
    if (weights.size() != 0) {
      const double total = weights.sum();
      if (total <= 0.0) throw invalid_input("regressor weights sum to zero");
      for (int i = 0; i < n; ++i) wn(i, 0) = weights(i) * n / total;
    }

    std::vector<int> dims{in_dim_};
    for (int h : hidden_) dims.push_back(h);
    dims.push_back(1);
    auto rng = make_rng(seed_, 21);
    net_ = make_mlp(dims, rng);
    auto params = net_.params();
    AdamState adam;
    Var xin = make_var(x);
    Var tgt = make_var(target);
    Var wc = make_var(wn);
    for (int e = 0; e < epochs_; ++e) {
      Tape tape;
      Var diff = tape.sub(mlp_forward(tape, net_, xin, false), tgt);
      Var loss = tape.mean_all(tape.mul(wc, tape.mul(diff, diff)));
      zero_grad(params);
      tape.backward(loss);
      adam_step(params, adam, lr_);
    }
  }

  RegKind kind_ = RegKind::ridge;
  bool fitted_ = false;
  int in_dim_ = 0;
  double lambda_ = 1e-3;
  Vec w_;
  double b_ = 0.0;
  std::vector<int> hidden_{32};
  uint64_t seed_ = 1;
  int epochs_ = 1500;
  double lr_ = 1e-2;
  Mlp net_;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
};

constexpr double kPropensityClipLo = 0.02;
constexpr double kPropensityClipHi = 0.98;

struct Propensity {
  bool constant_mode = true;
  double p = 0.5;
  Vec w;
  double b = 0.0;

  static Propensity constant(double prob) {
    if (prob <= 0.0 || prob >= 1.0)
      throw invalid_input("constant propensity must lie in (0, 1)");
    Propensity g;
    g.constant_mode = true;
    g.p = prob;
    return g;
  }

  Vec predict(const Mat& x) const {
    Vec out(x.rows());
    if (constant_mode) {
      out.setConstant(p);
    } else {
      if (x.cols() != w.size())
        throw invalid_input("propensity feature width mismatch");
      for (int i = 0; i < x.rows(); ++i)
        out(i) = 1.0 / (1.0 + std::exp(-(x.row(i).dot(w) + b)));
    }
    return out.cwiseMax(kPropensityClipLo).cwiseMin(kPropensityClipHi);
  }
};

// Full-batch logistic regression: 500 gradient steps, lr 0.1, L2 1e-4.
inline Propensity fit_propensity(const Mat& x, const std::vector<double>& t) {
  const int n = static_cast<int>(x.rows());
  if (static_cast<int>(t.size()) != n)
    throw invalid_input("propensity label length mismatch");
  int ones = 0;
  for (double v : t) ones += v > 0.5 ? 1 : 0;
  if (ones == 0 || ones == n)
    throw invalid_input("propensity labels are degenerate");

  Propensity g;
  g.constant_mode = false;
  g.w = Vec::Zero(x.cols());
  g.b = 0.0;
  const double lr = 0.1, l2 = 1e-4;
  Vec tv(n);
  for (int i = 0; i < n; ++i) tv(i) = t[i];
  for (int step = 0; step < 500; ++step) {
    Vec z = (x * g.w).array() + g.b;
    Vec pr = 1.0 / (1.0 + (-z.array()).exp());
    Vec resid = pr - tv;
    Vec grad_w = x.transpose() * resid / n + 2.0 * l2 * g.w;
    const double grad_b = resid.mean();
    g.w -= lr * grad_w;
    g.b -= lr * grad_b;
  }
  return g;
}

enum class BaselineKind { da, dr };

inline std::string baseline_kind_name(BaselineKind k) {
  return k == BaselineKind::da ? "da" : "dr";
}

inline BaselineKind baseline_kind_from_name(const std::string& s) {
  if (s == "da") return BaselineKind::da;
  if (s == "dr") return BaselineKind::dr;
  throw invalid_input("unknown baseline kind '" + s + "'");
}

// Hyperparameters for the regression backends behind both baseline recipes.
struct BackendSpec {
  double ridge_lambda = 1e-3;
  std::vector<int> mlp_hidden{32};
  int mlp_epochs = 1500;
  double mlp_lr = 1e-2;
};

struct BaselineModel {
  BaselineKind kind = BaselineKind::da;
  Regressor mu0, mu1, effect;
};

inline nlohmann::json baseline_to_json(const BaselineModel& m) {
  return {{"baseline_kind", baseline_kind_name(m.kind)},
          {"mu0", m.mu0.to_json()},
          {"mu1", m.mu1.to_json()},
          {"effect", m.effect.to_json()}};
}

inline BaselineModel baseline_from_json(const nlohmann::json& j) {
  BaselineModel m;
  m.kind = baseline_kind_from_name(j.at("baseline_kind").get<std::string>());
  m.mu0 = Regressor::from_json(j.at("mu0"));
  m.mu1 = Regressor::from_json(j.at("mu1"));
  m.effect = Regressor::from_json(j.at("effect"));
  return m;
}

inline void save_baseline(const std::string& path, const BaselineModel& m) {
  write_model_file(path, "baseline", baseline_to_json(m));
}

inline BaselineModel load_baseline(const std::string& path) {
  return baseline_from_json(read_model_file(path, "baseline"));
}

namespace detail {

// design matrix [X; G] restricted to the given rows
inline Mat design_with_exposure(const Mat& x, const std::vector<double>& gexp,
                                const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols() + 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)).head(x.cols()) = x.row(rows[i]);
    out(static_cast<Eigen::Index>(i), x.cols()) = gexp[rows[i]];
  }
  return out;
}

inline Mat rows_of(const Mat& x, const std::vector<int>& rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  return out;
}

inline Regressor make_backend(RegKind kind, uint64_t seed,
                              const BackendSpec& spec) {
  return kind == RegKind::ridge
             ? Regressor::ridge(spec.ridge_lambda)
             : Regressor::mlp(spec.mlp_hidden, seed, spec.mlp_epochs,
                              spec.mlp_lr);
}

inline void split_arms(const Dataset& d, std::vector<int>& treated,
                       std::vector<int>& control) {
  for (int i : d.train_indices())
    (d.t[i] > 0.5 ? treated : control).push_back(i);
  if (treated.size() < 4 || control.size() < 4)
    throw invalid_input("each treatment arm needs at least 4 train rows");
}

}  // namespace detail

// Pseudo-outcome difference used by the doubly robust recipe; exposed so the
// robustness properties can be probed with hand-made components.
inline std::vector<double> dr_pseudo_effect(const Mat& xg, const Vec& y,
                                            const std::vector<double>& t,
                                            const Vec& ghat,
                                            const Regressor& mu0,
                                            const Regressor& mu1) {
  const int n = static_cast<int>(xg.rows());
  Vec m0 = mu0.predict(xg), m1 = mu1.predict(xg);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) {
    const double d1 =
        m1(i) + (t[i] > 0.5 ? (y(i) - m1(i)) / ghat(i) : 0.0);
    const double d0 =
        m0(i) + (t[i] > 0.5 ? 0.0 : (y(i) - m0(i)) / (1.0 - ghat(i)));
    out[i] = d1 - d0;
  }
  return out;
}

// Domain-adaptation recipe: importance-weighted per-arm outcome fits on
// [X; G], per-arm pseudo-effects, then a final effect regression on X alone.
inline BaselineModel fit_da(const Dataset& d, const Propensity& g_prop,
                            RegKind kind, uint64_t seed = 1,
                            const BackendSpec& spec = {}) {
  std::vector<int> treated, control;
  detail::split_arms(d, treated, control);

  Mat xg_c = detail::design_with_exposure(d.x, d.g_exposure, control);
  Mat xg_t = detail::design_with_exposure(d.x, d.g_exposure, treated);
  Vec g_c = g_prop.predict(detail::rows_of(d.x, control));
  Vec g_t = g_prop.predict(detail::rows_of(d.x, treated));

  Vec y_c(control.size()), y_t(treated.size());
  for (size_t i = 0; i < control.size(); ++i) y_c(i) = d.y[control[i]];
  for (size_t i = 0; i < treated.size(); ++i) y_t(i) = d.y[treated[i]];

  BaselineModel m;
  m.kind = BaselineKind::da;
  m.mu0 = detail::make_backend(kind, mix_seed(seed, 1), spec);
  m.mu1 = detail::make_backend(kind, mix_seed(seed, 2), spec);
  m.mu0.fit(xg_c, y_c, (g_c.array() / (1.0 - g_c.array())).matrix());
  m.mu1.fit(xg_t, y_t, ((1.0 - g_t.array()) / g_t.array()).matrix());

  // stacked pseudo-effects: observed minus imputed (treated), imputed minus
  // observed (controls)
  const size_t nt = treated.size(), nc = control.size();
  Mat x_all(static_cast<Eigen::Index>(nt + nc), d.x.cols());
  Vec dhat(static_cast<Eigen::Index>(nt + nc));
  Vec mu0_t = m.mu0.predict(xg_t);
  Vec mu1_c = m.mu1.predict(xg_c);
  for (size_t i = 0; i < nt; ++i) {
    x_all.row(static_cast<Eigen::Index>(i)) = d.x.row(treated[i]);
    dhat(static_cast<Eigen::Index>(i)) = y_t(i) - mu0_t(i);
  }
  for (size_t i = 0; i < nc; ++i) {
    x_all.row(static_cast<Eigen::Index>(nt + i)) = d.x.row(control[i]);
    dhat(static_cast<Eigen::Index>(nt + i)) = mu1_c(i) - y_c(i);
  }
  m.effect = detail::make_backend(kind, mix_seed(seed, 3), spec);
  m.effect.fit(x_all, dhat);
  return m;
}

// Doubly robust recipe: unweighted per-arm outcome fits on [X; G], inverse
// propensity corrected pseudo-outcomes on every train row, effect fit on X.
inline BaselineModel fit_dr(const Dataset& d, const Propensity& g_prop,
                            RegKind kind, uint64_t seed = 1,
                            const BackendSpec& spec = {}) {
  std::vector<int> treated, control;
  detail::split_arms(d, treated, control);
  const std::vector<int> train = d.train_indices();

  BaselineModel m;
  m.kind = BaselineKind::dr;
  m.mu0 = detail::make_backend(kind, mix_seed(seed, 1), spec);
  m.mu1 = detail::make_backend(kind, mix_seed(seed, 2), spec);
  Vec y_c(control.size()), y_t(treated.size());
  for (size_t i = 0; i < control.size(); ++i) y_c(i) = d.y[control[i]];
  for (size_t i = 0; i < treated.size(); ++i) y_t(i) = d.y[treated[i]];
  m.mu0.fit(detail::design_with_exposure(d.x, d.g_exposure, control), y_c);
  m.mu1.fit(detail::design_with_exposure(d.x, d.g_exposure, treated), y_t);

  Mat xg = detail::design_with_exposure(d.x, d.g_exposure, train);
  Vec ghat = g_prop.predict(detail::rows_of(d.x, train));
  for (int i = 0; i < ghat.size(); ++i)
    if (ghat(i) <= kPropensityClipLo + 1e-12 ||
        ghat(i) >= kPropensityClipHi - 1e-12) {
      log_warn("propensity at clip boundary; pseudo-outcome variance may "
               "inflate");
      break;
    }

  Vec y_tr(train.size());
  std::vector<double> t_tr(train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    y_tr(static_cast<Eigen::Index>(i)) = d.y[train[i]];
    t_tr[i] = d.t[train[i]];
  }
  auto pseudo = dr_pseudo_effect(xg, y_tr, t_tr, ghat, m.mu0, m.mu1);
  Vec dhat(static_cast<Eigen::Index>(pseudo.size()));
  for (size_t i = 0; i < pseudo.size(); ++i)
    dhat(static_cast<Eigen::Index>(i)) = pseudo[i];

  m.effect = detail::make_backend(kind, mix_seed(seed, 3), spec);
  m.effect.fit(detail::rows_of(d.x, train), dhat);
  return m;
}

// Outcome prediction routes each node to its own arm's fit on [X_i; G_i].
inline std::vector<double> baseline_predict_outcome(
    const BaselineModel& m, const Mat& x, const std::vector<double>& t,
    const std::vector<double>& gexp) {
  const int n = static_cast<int>(x.rows());
  if (static_cast<int>(t.size()) != n || static_cast<int>(gexp.size()) != n)
    throw invalid_input("treatment/exposure length mismatch");
  std::vector<int> all(n);
  for (int i = 0; i < n; ++i) all[i] = i;
  Mat xg = detail::design_with_exposure(x, gexp, all);
  Vec p0 = m.mu0.predict(xg), p1 = m.mu1.predict(xg);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = t[i] > 0.5 ? p1(i) : p0(i);
  return out;
}

inline std::vector<double> baseline_predict_ite(const BaselineModel& m,
                                                const Mat& x) {
  Vec v = m.effect.predict(x);
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace netcausal
