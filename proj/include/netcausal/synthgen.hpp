#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "netcausal/common.hpp"
#include "netcausal/graph.hpp"
#include "netcausal/knn.hpp"

namespace netcausal {

enum class Schema { wave1, pokec };
enum class ResponseModel { G0, G1, G2 };
enum class AssignMode { randomized, observational };

struct FeatureSpec {
  std::string name;
  int lo;
  int hi;  // uniform over {lo..hi}; {0,1} doubles as Bernoulli(0.5)
};

inline const std::vector<FeatureSpec>& schema_features(Schema schema) {
  static const std::vector<FeatureSpec> wave1{
      {"H1GH52", 0, 1}, {"H1ED3", 0, 1},   {"H1ED5", 0, 1},  {"H1ED7", 0, 1},
      {"H1HS1", 0, 1},  {"H1HS3", 0, 1},   {"H1WP17B", 0, 1}, {"H1TO51", 0, 1},
      {"H1TO53", 0, 1}, {"H1NB5", 0, 1},   {"H1EE3", 0, 1},  {"PA57D", 0, 1},
      {"H1DA5", 0, 3},  {"H1DA7", 0, 3},   {"H1ED11", 1, 4}, {"H1ED12", 1, 4},
      {"H1ED13", 1, 4}, {"H1ED14", 1, 4},  {"H1DS12", 0, 3}};
  static const std::vector<FeatureSpec> pokec{
      {"gender", 0, 1},    {"age", 15, 60},   {"height", 140, 200},
      {"weight", 30, 200}, {"education", 0, 3}, {"eyesight", 0, 1},
      {"smoke", 0, 3},     {"alcohol", 0, 3}, {"sex", 0, 2}};
  return schema == Schema::wave1 ? wave1 : pokec;
}

inline std::string schema_name(Schema s) {
  return s == Schema::wave1 ? "wave1" : "pokec";
}

inline Schema schema_from_name(const std::string& s) {
  if (s == "wave1") return Schema::wave1;
  if (s == "pokec") return Schema::pokec;
  throw invalid_input("unknown schema: " + s);
}

struct GenConfig {
  Schema schema = Schema::wave1;
  int n = 1000;
  int k = 10;
  std::string edge_file;  // overrides kNN construction when nonempty
  Metric metric = Metric::cosine;
  AssignMode mode = AssignMode::randomized;
  double p = 0.1;
  double alpha = 0.5;
  int spillover_order = 1;
  ResponseModel response = ResponseModel::G0;
  double kappa_nl = 0.0;
  double noise_sd = 0.1;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 2) throw invalid_input("gen: n must be >= 2");
    if (p <= 0.0 || p >= 1.0) throw invalid_input("gen: need 0 < p < 1");
    if (alpha < 0.0) throw invalid_input("gen: alpha must be >= 0");
    if (kappa_nl < 0.0) throw invalid_input("gen: kappa_nl must be >= 0");
    if (noise_sd < 0.0) throw invalid_input("gen: noise_sd must be >= 0");
    if (spillover_order != 1 && spillover_order != 2)
      throw invalid_input("gen: spillover order must be 1 or 2");
    if (edge_file.empty() && (k < 1 || k >= n))
      throw invalid_input("gen: need 1 <= k < n");
  }
};

struct Dataset {
  Mat x;
  std::vector<double> t;
  std::vector<double> g_exposure;
  std::vector<double> y;
  bool has_truth = false;
  std::vector<double> y0;
  std::vector<double> tau;
  std::vector<double> delta;
  std::vector<int> split;  // 0 = train, 1 = val, 2 = test
  AssignMode mode = AssignMode::randomized;
  double p = 0.0;

  int n() const { return static_cast<int>(x.rows()); }

  std::vector<int> indices_of(int which) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i)
      if (split[i] == which) out.push_back(i);
    return out;
  }
  std::vector<int> train_indices() const { return indices_of(0); }
  std::vector<int> val_indices() const { return indices_of(1); }
  std::vector<int> test_indices() const { return indices_of(2); }
};

// Columns shifted/scaled to zero mean, unit (population) variance;
// constant columns zero out.
inline void standardize_columns(Mat& x) {
  for (int j = 0; j < x.cols(); ++j) {
    const double mean = x.col(j).mean();
    x.col(j).array() -= mean;
    const double sd = std::sqrt(x.col(j).squaredNorm() / x.rows());
    if (sd < 1e-12)
      x.col(j).setZero();
    else
      x.col(j) /= sd;
  }
}

inline Mat gen_covariates_raw(Schema schema, int n, std::mt19937_64& rng) {
  if (n < 2) throw invalid_input("gen_covariates: n must be >= 2");
  const auto& feats = schema_features(schema);
  Mat x(n, static_cast<Eigen::Index>(feats.size()));
  for (int i = 0; i < n; ++i)
    for (size_t j = 0; j < feats.size(); ++j) {
      std::uniform_int_distribution<int> u(feats[j].lo, feats[j].hi);
      x(i, static_cast<Eigen::Index>(j)) = static_cast<double>(u(rng));
    }
  return x;
}

inline Mat gen_covariates(Schema schema, int n, std::mt19937_64& rng) {
  Mat x = gen_covariates_raw(schema, n, rng);
  standardize_columns(x);
  return x;
}

// Width-8 tanh networks for the wave1 nonlinear terms; one pair of draws
// per dataset. Coefficients ~ N(0, 0.25).
struct TruthNets {
  Vec a_y0, b_y0, c_y0;
  Vec a_tau, b_tau, c_tau;

  static TruthNets zeros() {
    TruthNets t;
    t.a_y0 = t.b_y0 = t.c_y0 = Vec::Zero(8);
    t.a_tau = t.b_tau = t.c_tau = Vec::Zero(8);
    return t;
  }

  double eval_y0(double s) const { return eval(a_y0, b_y0, c_y0, s); }
  double eval_tau(double s) const { return eval(a_tau, b_tau, c_tau, s); }

 private:
  static double eval(const Vec& a, const Vec& b, const Vec& c, double s) {
    double out = 0.0;
    for (int u = 0; u < a.size(); ++u) out += c[u] * std::tanh(a[u] * s + b[u]);
    return out;
  }
};

inline TruthNets draw_truth_nets(std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 0.5);
  TruthNets t;
  auto draw = [&](Vec& v) {
    v = Vec(8);
    for (int i = 0; i < 8; ++i) v[i] = nd(rng);
  };
  draw(t.a_y0);
  draw(t.b_y0);
  draw(t.c_y0);
  draw(t.a_tau);
  draw(t.b_tau);
  draw(t.c_tau);
  return t;
}

// Baseline outcome and treatment effect, evaluated exactly as printed.
// wave1 feature indices follow schema_features order. pokec adds per-node
// Gaussian noise with mean 0.1, sd 0.5 to both quantities.
inline void gen_truth_with_nets(const Mat& x, Schema schema,
                                const TruthNets& nets, std::mt19937_64& rng,
                                std::vector<double>& y0,
                                std::vector<double>& tau) {
  const int n = static_cast<int>(x.rows());
  const auto d = static_cast<Eigen::Index>(schema_features(schema).size());
  if (x.cols() != d)
    throw invalid_input("gen_truth: covariate width does not match schema");
  y0.assign(n, 0.0);
  tau.assign(n, 0.0);
  if (schema == Schema::wave1) {
    for (int i = 0; i < n; ++i) {
      const auto r = x.row(i);
      const double s_y0 = r[4] + r[5] + r[6] + r[7] + r[8] + r[9] + r[10] + r[11];
      y0[i] = -r[0] + 2.0 * r[1] - r[2] - 2.0 * r[3] -
              0.5 * (r[14] + r[15] + r[16] + r[17]) + 0.5 * (r[12] + r[13]) -
              3.0 * r[18] + nets.eval_y0(s_y0);
      const double s_tau = r[4] + r[5] + r[6] + r[7] + r[8] + r[9] + r[10] +
                           r[11] + r[12] + r[13];
      tau[i] = r[1] + 0.5 * (r[0] + r[2] + r[3]) +
               0.5 * (r[14] + r[15] + r[16] + r[17]) + r[18] +
               nets.eval_tau(s_tau);
    }
  } else {
    std::normal_distribution<double> eps(0.1, 0.5);
    for (int i = 0; i < n; ++i) {
      const auto r = x.row(i);
      const double gender = r[0], age = r[1], weight = r[3], edu = r[4];
      const double eye = r[5], smoke = r[6], alcohol = r[7], sex = r[8];
      y0[i] = 0.2 * (1.0 - gender) + 0.5 * age - 0.2 * weight + 0.5 * edu -
              0.6 * (3.0 - smoke) + 0.2 * sex - 0.6 * (3.0 - alcohol) + eps(rng);
      tau[i] = 0.8 * (1.0 - gender) + age + 0.3 * weight + 0.5 * (1.0 - eye) +
               0.5 * (edu + 0.5) + 0.6 * smoke + 0.5 * alcohol + eps(rng);
    }
  }
}

inline void gen_truth(const Mat& x, Schema schema, std::mt19937_64& rng,
                      std::vector<double>& y0, std::vector<double>& tau) {
  TruthNets nets =
      schema == Schema::wave1 ? draw_truth_nets(rng) : TruthNets::zeros();
  gen_truth_with_nets(x, schema, nets, rng, y0, tau);
}

// Order 1: delta_i = alpha * mean_{j in N(i)} T_j tau_j; order 2 adds
// alpha^2 * mean over the 2-hop set. Real-valued T is allowed (policies).
inline std::vector<double> gen_spillover(const Graph& g,
                                         const std::vector<double>& t,
                                         const std::vector<double>& tau,
                                         double alpha, int order) {
  const int n = g.size();
  if (static_cast<int>(t.size()) != n || static_cast<int>(tau.size()) != n)
    throw invalid_input("gen_spillover: length mismatch");
  if (order != 1 && order != 2)
    throw invalid_input("gen_spillover: order must be 1 or 2");
  if (alpha < 0.0) throw invalid_input("gen_spillover: alpha must be >= 0");
  std::vector<double> delta(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto& nb = g.neighbors(i);
    if (!nb.empty()) {
      double s = 0.0;
      for (int j : nb) s += t[j] * tau[j];
      delta[i] = alpha * s / static_cast<double>(nb.size());
    }
    if (order == 2) {
      const auto hops = g.two_hop(i);
      if (!hops.empty()) {
        double s = 0.0;
        for (int k : hops) s += t[k] * tau[k];
        delta[i] += alpha * alpha * s / static_cast<double>(hops.size());
      }
    }
  }
  return delta;
}

inline std::vector<double> gen_response(const std::vector<double>& y0,
                                        const std::vector<double>& tau,
                                        const std::vector<double>& delta,
                                        const std::vector<double>& t,
                                        ResponseModel model, double kappa_nl,
                                        double noise_sd, std::mt19937_64& rng) {
  const size_t n = y0.size();
  if (tau.size() != n || delta.size() != n || t.size() != n)
    throw invalid_input("gen_response: length mismatch");
  std::normal_distribution<double> nd(0.0, noise_sd);
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) {
    double v = y0[i] + t[i] * tau[i] + delta[i];
    switch (model) {
      case ResponseModel::G0:
        break;
      case ResponseModel::G1:
        v += kappa_nl * delta[i] * delta[i];
        break;
      case ResponseModel::G2:
        v += 0.5 * kappa_nl * delta[i] * delta[i] +
             0.5 * kappa_nl * tau[i] * delta[i];
        break;
    }
    y[i] = v + (noise_sd > 0.0 ? nd(rng) : 0.0);
  }
  return y;
}

inline std::vector<double> assign_treatment(AssignMode mode, const Mat& x,
                                            double p, std::mt19937_64& rng) {
  const int n = static_cast<int>(x.rows());
  std::vector<double> t(n, 0.0);
  if (mode == AssignMode::randomized) {
    if (p <= 0.0 || p >= 1.0)
      throw invalid_input("assign_treatment: need 0 < p < 1");
    std::bernoulli_distribution bern(p);
    for (int i = 0; i < n; ++i) t[i] = bern(rng) ? 1.0 : 0.0;
    return t;
  }
  // Observational: T_i ~ Bern(sigmoid(c w.X_i)); the scale c halves until
  // the realized treated fraction lands in [0.2, 0.8].
  Vec w(x.cols());
  std::normal_distribution<double> nd;
  for (int j = 0; j < w.size(); ++j) w[j] = nd(rng);
  w /= std::max(w.norm(), 1e-12);
  double c = 1.5;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int attempt = 0; attempt < 24; ++attempt) {
    double treated = 0.0;
    for (int i = 0; i < n; ++i) {
      const double prob = 1.0 / (1.0 + std::exp(-c * x.row(i).dot(w)));
      t[i] = (u(rng) < prob) ? 1.0 : 0.0;
      treated += t[i];
    }
    const double frac = treated / n;
    if (frac >= 0.2 && frac <= 0.8) return t;
    c *= 0.5;
  }
  throw training_error("assign_treatment: could not balance observational draw");
}

// G_i = fraction of treated neighbors; isolated nodes get 0.
inline std::vector<double> compute_exposure(const Graph& g,
                                            const std::vector<double>& t) {
  if (static_cast<int>(t.size()) != g.size())
    throw invalid_input("compute_exposure: length mismatch");
  std::vector<double> out(t.size(), 0.0);
  for (int i = 0; i < g.size(); ++i) {
    const auto& nb = g.neighbors(i);
    if (nb.empty()) continue;
    double s = 0.0;
    for (int j : nb) s += t[j];
    out[i] = s / static_cast<double>(nb.size());
  }
  return out;
}

inline std::vector<int> make_splits(int n, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const int n_train = static_cast<int>(0.80 * n);
  const int n_val = static_cast<int>(0.05 * n);
  std::vector<int> split(n, 2);
  for (int i = 0; i < n_train; ++i) split[order[i]] = 0;
  for (int i = n_train; i < n_train + n_val && i < n; ++i) split[order[i]] = 1;
  return split;
}

struct GeneratedData {
  Dataset data;
  Graph graph;
};

inline GeneratedData generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  auto rng_x = make_rng(cfg.seed, 1);
  auto rng_truth = make_rng(cfg.seed, 2);
  auto rng_assign = make_rng(cfg.seed, 3);
  auto rng_response = make_rng(cfg.seed, 4);
  auto rng_split = make_rng(cfg.seed, 5);

  GeneratedData out;
  Dataset& d = out.data;
  d.x = gen_covariates(cfg.schema, cfg.n, rng_x);
  out.graph = cfg.edge_file.empty()
                  ? build_knn_graph(d.x, cfg.k, cfg.metric)
                  : load_edge_list(cfg.edge_file, cfg.n);
  gen_truth(d.x, cfg.schema, rng_truth, d.y0, d.tau);
  d.t = assign_treatment(cfg.mode, d.x, cfg.p, rng_assign);
  d.g_exposure = compute_exposure(out.graph, d.t);
  d.delta = gen_spillover(out.graph, d.t, d.tau, cfg.alpha, cfg.spillover_order);
  d.y = gen_response(d.y0, d.tau, d.delta, d.t, cfg.response, cfg.kappa_nl,
                     cfg.noise_sd, rng_response);
  d.has_truth = true;
  d.split = make_splits(cfg.n, rng_split);
  d.mode = cfg.mode;
  d.p = cfg.p;
  return out;
}

}  // namespace netcausal
