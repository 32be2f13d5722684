#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "netcausal/adam.hpp"
#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/hsic.hpp"
#include "netcausal/layers.hpp"
#include "netcausal/model_io.hpp"
#include "netcausal/synthgen.hpp"
#include "netcausal/tape.hpp"

namespace netcausal {

enum class GnnKind { gcn, sage, onegnn };
enum class BalanceTarget { phi, gnn, none };
// What fills the network-representation slot when extracting per-node
// effects: a literal zero vector for both arms, or the stack's output on an
// edgeless graph (the treated arm then sees its own representation echoed
// through the self-loop; the control arm still reduces to zeros).
enum class IteZMode { zero, edgeless };

inline std::string gnn_kind_name(GnnKind k) {
  switch (k) {
    case GnnKind::gcn: return "gcn";
    case GnnKind::sage: return "sage";
    default: return "onegnn";
  }
}

inline GnnKind gnn_kind_from_name(const std::string& s) {
  if (s == "gcn") return GnnKind::gcn;
  if (s == "sage") return GnnKind::sage;
  if (s == "onegnn") return GnnKind::onegnn;
  throw invalid_input("unknown gnn kind '" + s + "'");
}

inline std::string balance_name(BalanceTarget b) {
  switch (b) {
    case BalanceTarget::phi: return "phi";
    case BalanceTarget::gnn: return "gnn";
    default: return "none";
  }
}

inline BalanceTarget balance_from_name(const std::string& s) {
  if (s == "phi") return BalanceTarget::phi;
  if (s == "gnn") return BalanceTarget::gnn;
  if (s == "none") return BalanceTarget::none;
  throw invalid_input("unknown balance target '" + s + "'");
}

inline std::string ite_z_name(IteZMode m) {
  return m == IteZMode::zero ? "zero" : "edgeless";
}

inline IteZMode ite_z_from_name(const std::string& s) {
  if (s == "zero") return IteZMode::zero;
  if (s == "edgeless") return IteZMode::edgeless;
  throw invalid_input("unknown ite mode '" + s + "'");
}

struct EstimatorConfig {
  GnnKind gnn_kind = GnnKind::gcn;
  // Preset widths; dim_scale shrinks them (floor 2) for desk-scale runs.
  std::vector<int> phi_dims{64, 64};
  std::vector<int> gnn_dims{128, 32};
  std::vector<int> head_dims{64, 32};
  double dim_scale = 1.0;
  double kappa = 0.0;
  BalanceTarget balance = BalanceTarget::phi;
  double sigma = 0.0;  // 0 picks the median pairwise distance per batch
  bool use_exposure = true;
  IteZMode ite_z = IteZMode::zero;

  void validate() const {
    if (phi_dims.empty()) throw invalid_input("phi widths must be nonempty");
    if (gnn_dims.size() < 2 || gnn_dims.size() > 3)
      throw invalid_input("gnn stack must have 2 or 3 layers");
    for (int d : phi_dims)
      if (d < 1) throw invalid_input("phi widths must be positive");
    for (int d : gnn_dims)
      if (d < 1) throw invalid_input("gnn widths must be positive");
    for (int d : head_dims)
      if (d < 1) throw invalid_input("head widths must be positive");
    if (dim_scale <= 0.0) throw invalid_input("dim_scale must be positive");
    if (kappa < 0.0) throw invalid_input("kappa must be nonnegative");
    if (sigma < 0.0) throw invalid_input("sigma must be nonnegative");
  }
};

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int epochs = 20000;
  int eval_every = 2000;
  double dropout = 0.5;
  int hsic_batch = 256;
  uint64_t seed = 1;

  void validate() const {
    if (lr <= 0.0) throw invalid_input("lr must be positive");
    if (epochs < 1) throw invalid_input("epochs must be positive");
    if (eval_every < 1) throw invalid_input("eval_every must be positive");
    if (dropout < 0.0 || dropout >= 1.0)
      throw invalid_input("dropout must lie in [0, 1)");
    if (hsic_batch < 2) throw invalid_input("hsic_batch must be at least 2");
  }
};

struct EstimatorModel {
  EstimatorConfig cfg;
  int in_dim = 0;
  Mlp phi;
  std::vector<Var> gnn_w;
  std::vector<Var> gnn_w2;  // second per-layer weight, onegnn only
  Mlp h0, h1;
  // Outcome standardization fitted on the train split; predictions and
  // effects are mapped back to raw units at the API boundary.
  double y_mean = 0.0;
  double y_scale = 1.0;

  int phi_out() const {
    return static_cast<int>(phi.layers.back().W->value.cols());
  }
  int gnn_out() const {
    return static_cast<int>(gnn_w.back()->value.cols());
  }

  std::vector<Var> params() const {
    std::vector<Var> out = phi.params();
    for (const auto& w : gnn_w) out.push_back(w);
    for (const auto& w : gnn_w2) out.push_back(w);
    for (const auto& p : h0.params()) out.push_back(p);
    for (const auto& p : h1.params()) out.push_back(p);
    return out;
  }
};

inline int scaled_dim(int d, double factor) {
  return std::max(2, static_cast<int>(std::llround(d * factor)));
}

inline EstimatorModel make_estimator(const EstimatorConfig& cfg, int in_dim,
                                     std::mt19937_64& rng) {
  cfg.validate();
  if (in_dim < 1) throw invalid_input("estimator needs at least one feature");
  EstimatorModel m;
  m.cfg = cfg;
  m.in_dim = in_dim;

  std::vector<int> pd{in_dim};
  for (int d : cfg.phi_dims) pd.push_back(scaled_dim(d, cfg.dim_scale));
  m.phi = make_mlp(pd, rng);

  int prev = pd.back();
  for (int d_raw : cfg.gnn_dims) {
    const int d = scaled_dim(d_raw, cfg.dim_scale);
    m.gnn_w.push_back(make_var(glorot_uniform(prev, d, rng), true));
    if (cfg.gnn_kind == GnnKind::onegnn)
      m.gnn_w2.push_back(make_var(glorot_uniform(prev, d, rng), true));
    prev = d;
  }

  std::vector<int> hd{pd.back() + prev + 1};
  for (int d : cfg.head_dims) hd.push_back(scaled_dim(d, cfg.dim_scale));
  hd.push_back(1);
  m.h0 = make_mlp(hd, rng);
  m.h1 = make_mlp(hd, rng);
  return m;
}

struct GraphOps {
  NormAdjacency norm;
  SparseRows mean_self;
  SparseRows nmean;
};

inline GraphOps make_graph_ops(const Graph& g) {
  return {normalized_adjacency(g), neighbor_mean_with_self(g),
          neighbor_mean(g)};
}

// Hidden layers activate; the final layer stays linear so the heads see a
// signed representation (sage normalizes every layer instead).
inline Var run_gnn_stack(Tape& tape, const EstimatorModel& m,
                         const GraphOps& ops, Var h) {
  const size_t depth = m.gnn_w.size();
  for (size_t l = 0; l < depth; ++l) {
    const bool activate = (l + 1 < depth);
    switch (m.cfg.gnn_kind) {
      case GnnKind::gcn:
        h = gcn_layer(tape, h, ops.norm, m.gnn_w[l], activate);
        break;
      case GnnKind::sage:
        h = sage_layer(tape, h, ops.mean_self, m.gnn_w[l]);
        break;
      case GnnKind::onegnn:
        h = onegnn_layer(tape, h, ops.nmean, m.gnn_w[l], m.gnn_w2[l],
                         activate);
        break;
    }
  }
  return h;
}

struct ForwardOut {
  Var yhat;     // n x 1, standardized units
  Var rep_phi;  // n x phi_out
  Var rep_gnn;  // n x gnn_out
};

// Full-graph forward. Treated rows feed their representation into the message
// passing stack, control rows contribute zeros; every node is then scored by
// the head matching its own treatment.
inline ForwardOut estimator_forward(Tape& tape, const EstimatorModel& m,
                                    const GraphOps& ops, const Mat& x,
                                    const std::vector<double>& t,
                                    const std::vector<double>& g_exp,
                                    double dropout_rate = 0.0,
                                    std::mt19937_64* dropout_rng = nullptr) {
  const int n = static_cast<int>(x.rows());
  if (x.cols() != m.in_dim)
    throw invalid_input("covariate width " + std::to_string(x.cols()) +
                        " does not match model input " +
                        std::to_string(m.in_dim));
  if (static_cast<int>(t.size()) != n || static_cast<int>(g_exp.size()) != n)
    throw invalid_input("treatment/exposure length must match covariate rows");

  Var r = mlp_forward(tape, m.phi, make_var(x), true, dropout_rate,
                      dropout_rng);

  Mat tcol(n, 1), comp(n, 1), gcol(n, 1);
  for (int i = 0; i < n; ++i) {
    tcol(i, 0) = t[i];
    comp(i, 0) = 1.0 - t[i];
    gcol(i, 0) = m.cfg.use_exposure ? g_exp[i] : 0.0;
  }

  Var masked = tape.row_scale(r, make_var(tcol));
  Var z = run_gnn_stack(tape, m, ops, masked);
  Var head_in = tape.concat_cols({r, z, make_var(gcol)});
  // Dropping concatenated coordinates during training keeps the heads
  // calibrated near zeroed representation/exposure inputs, which is exactly
  // where effects are read off.
  if (dropout_rng && dropout_rate > 0.0)
    head_in = tape.dropout(head_in, dropout_rate, *dropout_rng, true);
  Var y0 = mlp_forward(tape, m.h0, head_in, false, dropout_rate, dropout_rng);
  Var y1 = mlp_forward(tape, m.h1, head_in, false, dropout_rate, dropout_rng);
  Var yhat = tape.add(tape.row_scale(y1, make_var(tcol)),
                      tape.row_scale(y0, make_var(comp)));
  return {yhat, r, z};
}

inline ForwardOut estimator_forward(Tape& tape, const EstimatorModel& m,
                                    const Graph& g, const Mat& x,
                                    const std::vector<double>& t,
                                    const std::vector<double>& g_exp) {
  GraphOps ops = make_graph_ops(g);
  return estimator_forward(tape, m, ops, x, t, g_exp);
}

inline std::vector<double> predict_outcomes(const EstimatorModel& m,
                                            const Graph& g, const Mat& x,
                                            const std::vector<double>& t,
                                            const std::vector<double>& g_exp) {
  Tape tape;
  ForwardOut out = estimator_forward(tape, m, g, x, t, g_exp);
  std::vector<double> y(x.rows());
  for (int i = 0; i < x.rows(); ++i)
    y[i] = out.yhat->value(i, 0) * m.y_scale + m.y_mean;
  return y;
}

// Per-node effect under the isolated counterfactual: zero exposure, zero (or
// edgeless-propagated) network slot. Row-local by construction.
inline std::vector<double> extract_ite(const EstimatorModel& m, const Mat& x) {
  const int n = static_cast<int>(x.rows());
  if (x.cols() != m.in_dim)
    throw invalid_input("covariate width does not match model input");
  Tape tape;
  Var r = mlp_forward(tape, m.phi, make_var(x), true);
  Var zero_z = make_var(Mat::Zero(n, m.gnn_out()));
  Var z1 = zero_z;
  if (m.cfg.ite_z == IteZMode::edgeless) {
    GraphOps ops = make_graph_ops(Graph::from_edges(n, {}));
    z1 = run_gnn_stack(tape, m, ops, r);
  }
  Var zero_g = make_var(Mat::Zero(n, 1));
  Var v1 = mlp_forward(tape, m.h1, tape.concat_cols({r, z1, zero_g}), false);
  Var v0 = mlp_forward(tape, m.h0, tape.concat_cols({r, zero_z, zero_g}),
                       false);
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i)
    out[i] = (v1->value(i, 0) - v0->value(i, 0)) * m.y_scale;
  return out;
}

struct Metrics {
  double rmse = 0.0;
  double pehe = 0.0;
  bool has_pehe = false;
};

// rmse is the root of the test-split mean squared prediction error; pehe is
// the mean squared effect error, reported unrooted.
inline Metrics compute_metrics(const std::vector<double>& yhat,
                               const std::vector<double>& y,
                               const std::vector<double>& tau_hat,
                               const std::vector<double>& tau,
                               const std::vector<int>& test_idx) {
  if (test_idx.empty()) throw invalid_input("empty test mask");
  if (yhat.size() != y.size())
    throw invalid_input("prediction/outcome length mismatch");
  Metrics m;
  double acc = 0.0;
  for (int i : test_idx) {
    if (i < 0 || i >= static_cast<int>(y.size()))
      throw invalid_input("test index out of range");
    const double d = y[i] - yhat[i];
    acc += d * d;
  }
  m.rmse = std::sqrt(acc / test_idx.size());
  if (!tau.empty() && !tau_hat.empty()) {
    if (tau_hat.size() != tau.size())
      throw invalid_input("effect/truth length mismatch");
    double p = 0.0;
    for (int i : test_idx) {
      const double d = tau[i] - tau_hat[i];
      p += d * d;
    }
    m.pehe = p / test_idx.size();
    m.has_pehe = true;
  }
  return m;
}

struct TrainResult {
  std::vector<int> eval_epochs;
  std::vector<double> train_mse;     // standardized units, dropout off
  std::vector<double> val_mse;       // standardized units, dropout off
  std::vector<double> hsic_monitor;  // penalty-target dependence, train rows
  int best_epoch = 0;
  double best_val = std::numeric_limits<double>::infinity();
  bool hsic_active = false;
};

namespace detail {

inline double mse_over(const Var& yhat, const std::vector<double>& y_std,
                       const std::vector<int>& idx) {
  double acc = 0.0;
  for (int i : idx) {
    const double d = yhat->value(i, 0) - y_std[i];
    acc += d * d;
  }
  return acc / idx.size();
}

}  // namespace detail

inline TrainResult train_estimator(EstimatorModel& m, const Dataset& d,
                                   const Graph& g, const TrainConfig& tc) {
  tc.validate();
  const std::vector<int> train_idx = d.train_indices();
  const std::vector<int> val_idx = d.val_indices();
  if (train_idx.empty()) throw invalid_input("train split is empty");

  // Standardize outcomes on the train split only.
  double mean = 0.0;
  for (int i : train_idx) mean += d.y[i];
  mean /= train_idx.size();
  double var = 0.0;
  for (int i : train_idx) var += (d.y[i] - mean) * (d.y[i] - mean);
  var /= train_idx.size();
  m.y_mean = mean;
  m.y_scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  std::vector<double> y_std(d.y.size());
  for (size_t i = 0; i < d.y.size(); ++i)
    y_std[i] = (d.y[i] - m.y_mean) / m.y_scale;

  int treated = 0;
  for (int i : train_idx) treated += d.t[i] > 0.5 ? 1 : 0;
  const bool both_arms =
      treated > 0 && treated < static_cast<int>(train_idx.size());
  double kappa = m.cfg.kappa;
  if (m.cfg.balance == BalanceTarget::none) kappa = 0.0;
  if (kappa > 0.0 && !both_arms) {
    log_warn("train split holds a single treatment arm; dropping the "
             "dependence penalty");
    kappa = 0.0;
  }

  TrainResult res;
  res.hsic_active = kappa > 0.0;

  GraphOps ops = make_graph_ops(g);
  std::vector<Var> params = m.params();
  AdamState adam;
  auto dropout_rng = make_rng(tc.seed, 11);
  auto batch_rng = make_rng(tc.seed, 12);

  Mat t_train(static_cast<Eigen::Index>(train_idx.size()), 1);
  for (size_t i = 0; i < train_idx.size(); ++i)
    t_train(static_cast<Eigen::Index>(i), 0) = d.t[train_idx[i]];

  std::vector<Mat> best;
  int last_finite = 0;

  auto evaluate = [&](int epoch) {
    Tape tape;
    ForwardOut out = estimator_forward(tape, m, ops, d.x, d.t, d.g_exposure);
    const double tr = detail::mse_over(out.yhat, y_std, train_idx);
    const double va =
        val_idx.empty() ? tr : detail::mse_over(out.yhat, y_std, val_idx);
    double dep = 0.0;
    if (m.cfg.balance != BalanceTarget::none && both_arms) {
      const Mat& rep = m.cfg.balance == BalanceTarget::phi
                           ? out.rep_phi->value
                           : out.rep_gnn->value;
      Mat rep_train(static_cast<Eigen::Index>(train_idx.size()), rep.cols());
      for (size_t i = 0; i < train_idx.size(); ++i)
        rep_train.row(static_cast<Eigen::Index>(i)) = rep.row(train_idx[i]);
      dep = hsic(rep_train, t_train, m.cfg.sigma);
    }
    res.eval_epochs.push_back(epoch);
    res.train_mse.push_back(tr);
    res.val_mse.push_back(va);
    res.hsic_monitor.push_back(dep);
    if (va < res.best_val) {
      res.best_val = va;
      res.best_epoch = epoch;
      best.clear();
      for (const auto& p : params) best.push_back(p->value);
    }
  };

  try {
    for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
      Tape tape;
      ForwardOut out = estimator_forward(
          tape, m, ops, d.x, d.t, d.g_exposure, tc.dropout,
          tc.dropout > 0.0 ? &dropout_rng : nullptr);

      Var pred = tape.select_rows(out.yhat, train_idx);
      Mat target(static_cast<Eigen::Index>(train_idx.size()), 1);
      for (size_t i = 0; i < train_idx.size(); ++i)
        target(static_cast<Eigen::Index>(i), 0) = y_std[train_idx[i]];
      Var diff = tape.sub(pred, make_var(target));
      Var loss = tape.mean_all(tape.mul(diff, diff));

      if (kappa > 0.0) {
        std::vector<int> batch = train_idx;
        if (static_cast<int>(batch.size()) > tc.hsic_batch) {
          std::shuffle(batch.begin(), batch.end(), batch_rng);
          batch.resize(tc.hsic_batch);
        }
        Var rep = m.cfg.balance == BalanceTarget::phi ? out.rep_phi
                                                      : out.rep_gnn;
        Var rep_b = tape.select_rows(rep, batch);
        Mat t_b(static_cast<Eigen::Index>(batch.size()), 1);
        for (size_t i = 0; i < batch.size(); ++i)
          t_b(static_cast<Eigen::Index>(i), 0) = d.t[batch[i]];
        double sigma = m.cfg.sigma;
        if (sigma <= 0.0) sigma = median_pairwise_distance(rep_b->value);
        loss = tape.add(loss, tape.scale(hsic_penalty(tape, rep_b, t_b, sigma),
                                         kappa));
      }

      if (!std::isfinite(loss->value(0, 0)))
        throw numeric_error("loss is not finite");
      zero_grad(params);
      tape.backward(loss);
      adam_step(params, adam, tc.lr, 0.9, 0.999, 1e-8, tc.weight_decay);
      last_finite = epoch;

      if (epoch % tc.eval_every == 0 || epoch == tc.epochs) evaluate(epoch);
    }
  } catch (const numeric_error& e) {
    throw training_error("training diverged after epoch " +
                         std::to_string(last_finite) + ": " + e.what());
  }

  if (!best.empty())
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
  return res;
}

inline nlohmann::json estimator_to_json(const EstimatorModel& m) {
  nlohmann::json j;
  j["gnn_kind"] = gnn_kind_name(m.cfg.gnn_kind);
  j["balance"] = balance_name(m.cfg.balance);
  j["ite_z"] = ite_z_name(m.cfg.ite_z);
  j["phi_dims"] = m.cfg.phi_dims;
  j["gnn_dims"] = m.cfg.gnn_dims;
  j["head_dims"] = m.cfg.head_dims;
  j["dim_scale"] = m.cfg.dim_scale;
  j["kappa"] = m.cfg.kappa;
  j["sigma"] = m.cfg.sigma;
  j["use_exposure"] = m.cfg.use_exposure;
  j["in_dim"] = m.in_dim;
  j["y_mean"] = m.y_mean;
  j["y_scale"] = m.y_scale;
  j["phi"] = mlp_to_json(m.phi);
  nlohmann::json ws = nlohmann::json::array();
  for (const auto& w : m.gnn_w) ws.push_back(mat_to_json(w->value));
  j["gnn_w"] = std::move(ws);
  nlohmann::json ws2 = nlohmann::json::array();
  for (const auto& w : m.gnn_w2) ws2.push_back(mat_to_json(w->value));
  j["gnn_w2"] = std::move(ws2);
  j["h0"] = mlp_to_json(m.h0);
  j["h1"] = mlp_to_json(m.h1);
  return j;
}

inline EstimatorModel estimator_from_json(const nlohmann::json& j) {
  EstimatorModel m;
  m.cfg.gnn_kind = gnn_kind_from_name(j.at("gnn_kind").get<std::string>());
  m.cfg.balance = balance_from_name(j.at("balance").get<std::string>());
  m.cfg.ite_z = ite_z_from_name(j.at("ite_z").get<std::string>());
  m.cfg.phi_dims = j.at("phi_dims").get<std::vector<int>>();
  m.cfg.gnn_dims = j.at("gnn_dims").get<std::vector<int>>();
  m.cfg.head_dims = j.at("head_dims").get<std::vector<int>>();
  m.cfg.dim_scale = j.at("dim_scale").get<double>();
  m.cfg.kappa = j.at("kappa").get<double>();
  m.cfg.sigma = j.at("sigma").get<double>();
  m.cfg.use_exposure = j.at("use_exposure").get<bool>();
  m.in_dim = j.at("in_dim").get<int>();
  m.y_mean = j.at("y_mean").get<double>();
  m.y_scale = j.at("y_scale").get<double>();
  m.phi = mlp_from_json(j.at("phi"));
  for (const auto& w : j.at("gnn_w"))
    m.gnn_w.push_back(make_var(mat_from_json(w), true));
  for (const auto& w : j.at("gnn_w2"))
    m.gnn_w2.push_back(make_var(mat_from_json(w), true));
  m.h0 = mlp_from_json(j.at("h0"));
  m.h1 = mlp_from_json(j.at("h1"));
  return m;
}

inline void save_estimator(const std::string& path, const EstimatorModel& m) {
  write_model_file(path, "estimator", estimator_to_json(m));
}

inline EstimatorModel load_estimator(const std::string& path) {
  return estimator_from_json(read_model_file(path, "estimator"));
}

}  // namespace netcausal
